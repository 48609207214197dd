//! Explicit well-posedness constants and the certificate built from them.

mod profile;

pub use profile::{Component, LipschitzParts, LipschitzProfile, ProfileBuilder, ProfileFn, TabulatedProfile};

use crate::error::{invalid, BsvieError, Result};

/// Points of the outer `t` grid used for suprema and outer integrals.
pub const T_POINTS: usize = 257;
/// Trapezoid intervals on each `t`-slice `[t, T]`.
pub const S_INTERVALS: usize = 512;
/// The `N` scan stops after this many consecutive non-improving candidates.
pub const SCAN_PATIENCE: usize = 50;
const SCAN_LIMIT: usize = 100_000_000;

/// Trapezoid rule for `int_t^T f(s) ds` on `S_INTERVALS` intervals.
pub fn slice_integral(t: f64, horizon: f64, f: impl Fn(f64) -> f64) -> f64 {
    if t >= horizon {
        return 0.0;
    }
    let h = (horizon - t) / S_INTERVALS as f64;
    let mut acc = 0.5 * (f(t) + f(horizon));
    for m in 1..S_INTERVALS {
        acc += f(t + h * m as f64);
    }
    acc * h
}

fn t_nodes(horizon: f64) -> impl Iterator<Item = f64> {
    (0..T_POINTS).map(move |k| horizon * k as f64 / (T_POINTS - 1) as f64)
}

/// `sup_t int_t^T f(t, s) ds` over the outer grid.
pub fn sup_slice_integral(horizon: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    t_nodes(horizon)
        .map(|t| slice_integral(t, horizon, |s| f(t, s)))
        .fold(0.0, f64::max)
}

/// `int_0^T (int_t^T f(t, s) ds)^power dt` with trapezoid rules on both levels.
pub fn outer_power_integral(horizon: f64, power: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = horizon / (T_POINTS - 1) as f64;
    t_nodes(horizon)
        .enumerate()
        .map(|(k, t)| {
            let w = if k == 0 || k == T_POINTS - 1 { 0.5 } else { 1.0 };
            w * slice_integral(t, horizon, |s| f(t, s)).powf(power)
        })
        .sum::<f64>()
        * h
}

/// `K~_p = K_p^{1/p}`.
pub fn kp_tilde(p: f64, kp: f64) -> f64 {
    kp.powf(1.0 / p)
}

/// `K-bar = 4 K~_p^2 sup_t int_t^T L_z^1(t, s)^2 ds`.
pub fn compute_bar_k(profile: &LipschitzProfile) -> Result<f64> {
    let lz = &profile.parts[1].lz;
    let sup = sup_slice_integral(profile.horizon, |t, s| lz.eval(t, s).powi(2));
    let kt = kp_tilde(profile.p, profile.kp);
    let bar = 4.0 * kt * kt * sup;
    if !bar.is_finite() {
        return Err(BsvieError::CertificationFailure(
            "integral of L_z^1 squared is not finite".into(),
        ));
    }
    Ok(bar)
}

/// `alpha = sqrt(N) / (sqrt(N) - sqrt(K-bar))`.
pub fn alpha(n: usize, bar_k: f64) -> f64 {
    let r = (n as f64).sqrt();
    r / (r - bar_k.sqrt())
}

/// Logarithm of `[1 + 2 K~ N alpha] alpha^N`; infinite when `N <= K-bar`.
pub fn log_objective(n: usize, kt: f64, bar_k: f64) -> f64 {
    if n == 0 || (n as f64) <= bar_k {
        return f64::INFINITY;
    }
    let a = alpha(n, bar_k);
    (1.0 + 2.0 * kt * n as f64 * a).ln() + n as f64 * a.ln()
}

/// Minimiser of the objective over integers `N > K-bar`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HatK {
    pub value: f64,
    pub n_p: usize,
    pub alpha: f64,
}

/// Scans `N = floor(K-bar) + 1, ...` until `SCAN_PATIENCE` candidates fail to improve.
pub fn compute_hat_kp(p: f64, kp: f64, bar_k: f64) -> Result<HatK> {
    if !(p > 1.0) {
        return invalid(format!("p must exceed 1, got {p}"));
    }
    if !(kp >= 1.0) || !kp.is_finite() {
        return invalid(format!("K_p must be at least 1, got {kp}"));
    }
    if !(bar_k >= 0.0) || !bar_k.is_finite() {
        return invalid(format!("K-bar must be finite and nonnegative, got {bar_k}"));
    }
    let kt = kp_tilde(p, kp);
    let start = bar_k.floor() as usize + 1;
    let mut best_n = start;
    let mut best = log_objective(start, kt, bar_k);
    let mut streak = 0;
    let mut n = start;
    while streak < SCAN_PATIENCE {
        n += 1;
        if n > SCAN_LIMIT {
            return Err(BsvieError::CertificationFailure(format!(
                "objective scan exceeded N = {SCAN_LIMIT} for K-bar = {bar_k}"
            )));
        }
        let v = log_objective(n, kt, bar_k);
        if v < best {
            best = v;
            best_n = n;
            streak = 0;
        } else {
            streak += 1;
        }
    }
    let a = alpha(best_n, bar_k);
    let value = (1.0 + 2.0 * kt * best_n as f64 * a) * a.powf(best_n as f64);
    if !value.is_finite() {
        return Err(BsvieError::CertificationFailure(format!(
            "K-hat overflows (log value {best:.3}) for K-bar = {bar_k}"
        )));
    }
    Ok(HatK {
        value,
        n_p: best_n,
        alpha: a,
    })
}

/// Which integrability condition a certificate evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hypothesis {
    /// Type-II generators, exponent `(p ^ 2)(1 + eps) / ((p ^ 2) - 1)`.
    TypeTwo,
    /// Type-I generators without the transposed argument, exponent `p (1 + eps) / (p - 1)`.
    TypeOne,
}

impl Hypothesis {
    pub fn label(self) -> &'static str {
        match self {
            Hypothesis::TypeTwo => "type2",
            Hypothesis::TypeOne => "type1",
        }
    }
}

/// Finite-value check of the integrability conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct Integrability {
    pub hypothesis: Hypothesis,
    /// `[part][y-term, z-term, zhat-term, l0-term]`.
    pub terms: [[f64; 4]; 2],
    pub finite: bool,
}

/// Evaluates the integrability terms of `profile` under `hyp`.
pub fn integrability(profile: &LipschitzProfile, hyp: Hypothesis) -> Result<Integrability> {
    let p = profile.p;
    let t = profile.horizon;
    let (q, outer) = match hyp {
        Hypothesis::TypeTwo => {
            let pm = p.min(2.0);
            (pm * (1.0 + profile.eps) / (pm - 1.0), pm - 1.0)
        }
        Hypothesis::TypeOne => (p * (1.0 + profile.eps) / (p - 1.0), p - 1.0),
    };
    let mut terms = [[0.0; 4]; 2];
    for (i, part) in profile.parts.iter().enumerate() {
        if hyp == Hypothesis::TypeOne && !part.lzhat.is_identically_zero() {
            return invalid(format!(
                "Type-I hypothesis requires {} to vanish",
                Component::Lzhat.key(i)
            ));
        }
        terms[i][0] = outer_power_integral(t, outer, |a, b| part.ly.eval(a, b).powf(q));
        terms[i][1] = sup_slice_integral(t, |a, b| part.lz.eval(a, b).powi(2));
        terms[i][2] = match hyp {
            Hypothesis::TypeTwo => sup_slice_integral(t, |a, b| part.lzhat.eval(a, b).powf(q)),
            Hypothesis::TypeOne => 0.0,
        };
        terms[i][3] = outer_power_integral(t, p, |a, b| part.l0.eval(a, b));
    }
    let finite = terms.iter().flatten().all(|v| v.is_finite());
    Ok(Integrability {
        hypothesis: hyp,
        terms,
        finite,
    })
}

/// Outcome of checking a generator's Lipschitz data.
#[derive(Clone, Debug, PartialEq)]
pub struct WellPosednessCertificate {
    pub hypothesis: Hypothesis,
    pub p: f64,
    pub kp: f64,
    pub kp_tilde: f64,
    pub bar_k: f64,
    pub n_p: usize,
    pub alpha: f64,
    pub hat_kp: f64,
    /// `K_p^0 = K-hat^p`.
    pub kp0: f64,
    pub integrability: Integrability,
    /// `sup_t int_t^T L_z^0(t, s)^2 ds`.
    pub lz0_sup: f64,
    /// `1 - K_p^0 (lz0_sup)^{p/2}`.
    pub margin: f64,
    pub size_condition: bool,
    pub certified: bool,
}

impl WellPosednessCertificate {
    /// Flat `key = value` lines.
    pub fn report(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("hypothesis".to_string(), self.hypothesis.label().to_string()),
            ("p".into(), self.p.to_string()),
            ("kp".into(), self.kp.to_string()),
            ("kp_tilde".into(), self.kp_tilde.to_string()),
            ("bar_k".into(), self.bar_k.to_string()),
            ("n_p".into(), self.n_p.to_string()),
            ("alpha".into(), self.alpha.to_string()),
            ("hat_kp".into(), self.hat_kp.to_string()),
            ("kp0".into(), self.kp0.to_string()),
            ("lz0_sup".into(), self.lz0_sup.to_string()),
            ("integrability_finite".into(), self.integrability.finite.to_string()),
        ];
        for (i, row) in self.integrability.terms.iter().enumerate() {
            for (name, v) in ["y", "z", "zhat", "l0"].iter().zip(row) {
                out.push((format!("integrability_{name}{i}"), v.to_string()));
            }
        }
        out.push(("size_condition".into(), self.size_condition.to_string()));
        out.push(("margin".into(), self.margin.to_string()));
        out.push(("certified".into(), self.certified.to_string()));
        out
    }
}

/// Computes every constant and checks the integrability and size conditions.
pub fn certify(profile: &LipschitzProfile, hyp: Hypothesis) -> Result<WellPosednessCertificate> {
    let p = profile.p;
    if p == 2.0 && profile.kp != 1.0 {
        return invalid(format!("K_2 is exactly 1, got {}", profile.kp));
    }
    if p != 2.0 && !(profile.kp >= 1.0) {
        return invalid(format!("K_p must be at least 1, got {}", profile.kp));
    }
    let integ = integrability(profile, hyp)?;
    let bar_k = compute_bar_k(profile)?;
    let hat = compute_hat_kp(p, profile.kp, bar_k)?;
    let kp0 = hat.value.powf(p);
    let lz0 = &profile.parts[0].lz;
    let lz0_sup = sup_slice_integral(profile.horizon, |t, s| lz0.eval(t, s).powi(2));
    if !lz0_sup.is_finite() {
        return Err(BsvieError::CertificationFailure(
            "integral of L_z^0 squared is not finite".into(),
        ));
    }
    let margin = if lz0_sup == 0.0 {
        1.0
    } else {
        1.0 - kp0 * lz0_sup.powf(p / 2.0)
    };
    let size_condition = margin > 0.0;
    Ok(WellPosednessCertificate {
        hypothesis: hyp,
        p,
        kp: profile.kp,
        kp_tilde: kp_tilde(p, profile.kp),
        bar_k,
        n_p: hat.n_p,
        alpha: hat.alpha,
        hat_kp: hat.value,
        kp0,
        certified: size_condition && integ.finite,
        integrability: integ,
        lz0_sup,
        margin,
        size_condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_bar_k_gives_three() {
        let h = compute_hat_kp(2.0, 1.0, 0.0).unwrap();
        assert_eq!(h, HatK { value: 3.0, n_p: 1, alpha: 1.0 });
    }

    #[test]
    fn alpha_arithmetic() {
        assert_eq!(alpha(4, 1.0), 2.0);
    }

    #[test]
    fn constant_lz1_bar_k() {
        let prof = LipschitzProfile::adapted(2.0, 0.0, 0.3, 0.0);
        let b = compute_bar_k(&prof).unwrap();
        assert!((b - 4.0 * 0.09 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_kp() {
        assert!(compute_hat_kp(2.0, 0.5, 0.0).is_err());
        let prof = LipschitzProfile::builder(1.0)
            .kp(1.5)
            .set(0, Component::Lz, ProfileFn::Const(0.0))
            .set(1, Component::Lz, ProfileFn::Const(0.0))
            .build()
            .unwrap();
        assert!(certify(&prof, Hypothesis::TypeTwo).is_err());
    }

    #[test]
    fn missing_component_is_invalid() {
        let r = LipschitzProfile::builder(1.0)
            .set(1, Component::Lz, ProfileFn::Const(0.0))
            .build();
        assert!(r.is_err());
    }

    #[test]
    fn type_one_requires_no_zhat() {
        let prof = LipschitzProfile::adapted(1.0, 0.0, 0.0, 0.2);
        assert!(certify(&prof, Hypothesis::TypeOne).is_err());
        assert!(certify(&prof, Hypothesis::TypeTwo).unwrap().certified);
    }

    #[test]
    fn singular_profile_is_not_integrable() {
        let prof = LipschitzProfile::builder(1.0)
            .set(0, Component::Lz, ProfileFn::Const(0.0))
            .set(1, Component::Lz, ProfileFn::Const(0.0))
            .set(1, Component::Ly, ProfileFn::closure(|t, s| 1.0 / (s - t)))
            .build()
            .unwrap();
        let c = certify(&prof, Hypothesis::TypeOne).unwrap();
        assert!(!c.integrability.finite);
        assert!(!c.certified);
    }

    #[test]
    fn polynomial_profile() {
        let f = ProfileFn::Poly(vec![1.0, 2.0, 3.0]);
        assert_eq!(f.eval(0.25, 0.75), 1.0 + 1.0 + 0.75);
    }

    #[test]
    fn table_interpolates_bilinearly() {
        let tab = TabulatedProfile::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((tab.eval(0.5, 0.5) - 1.5).abs() < 1e-15);
        assert!((tab.eval(0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((tab.eval(2.0, 2.0) - 3.0).abs() < 1e-15);
    }
}
