use crate::error::{Error, Result};
use crate::geometry::{euclid, MetricParams, ParabolicPoint};

/// Barenblatt-type profile
/// `t^(-n/(p(p-1))) exp(-((p-1)/p) (|x|^p / (p t))^(1/(p-1)))`.
pub fn barenblatt(x: &[f64], t: f64, m: &MetricParams) -> Result<f64> {
    m.check_dim(x.len())?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("barenblatt needs t > 0, got {t}")));
    }
    let p = m.p;
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let e = (r.powf(p) / (p * t)).powf(1.0 / (p - 1.0));
    Ok(t.powf(-(m.n as f64) / (p * (p - 1.0))) * (-(p - 1.0) / p * e).exp())
}

/// `log((s0 - t0 + 2 r0^p) / r0^p) + (|y0 - x0|^p / (s0 - t0 + 2 r0^p))^(1/(p-1))`.
pub fn freespace_law(from: &ParabolicPoint, r0: f64, to: &ParabolicPoint, m: &MetricParams) -> Result<f64> {
    m.check_dim(from.x.len())?;
    m.check_dim(to.x.len())?;
    freespace_law_raw(&from.x, from.t, r0, &to.x, to.t, m)
}

pub(crate) fn freespace_law_raw(x0: &[f64], t0: f64, r0: f64, y0: &[f64], s0: f64, m: &MetricParams) -> Result<f64> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::invalid("free-space law needs r0 > 0"));
    }
    let p = m.p;
    let hp = r0.powf(p);
    let span = s0 - t0 + 2.0 * hp;
    if !(span > 0.0) {
        return Err(Error::invalid(format!("free-space law: s0 - t0 + 2 r0^p = {span} is not positive")));
    }
    let off = euclid(x0, y0);
    Ok((span / hp).ln() + (off.powf(p) / span).powf(1.0 / (p - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, t: f64) -> ParabolicPoint {
        ParabolicPoint::new(vec![x], t)
    }

    #[test]
    fn barenblatt_values() {
        for &(n, p) in &[(1usize, 2.0), (2, 3.0), (3, 1.5)] {
            let m = MetricParams::new(n, p).unwrap();
            assert!((barenblatt(&vec![0.0; n], 1.0, &m).unwrap() - 1.0).abs() < 1e-15);
        }
        let m = MetricParams::new(1, 2.0).unwrap();
        assert!((barenblatt(&[0.0], 4.0, &m).unwrap() - 0.5).abs() < 1e-15);
        assert!((barenblatt(&[2.0], 1.0, &m).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(barenblatt(&[0.0], 0.0, &m).is_err());
        assert!(barenblatt(&[0.0, 1.0], 1.0, &m).is_err());
    }

    /// For p = 2 the profile is `t^(-1/2) exp(-x^2 / (4t))`, which solves `u_t = u_xx`.
    #[test]
    fn barenblatt_solves_heat_equation_for_p2() {
        let m = MetricParams::new(1, 2.0).unwrap();
        let h = 1e-4;
        for &(x, t) in &[(0.3, 0.7), (1.1, 2.0), (-0.5, 0.4)] {
            let u = |x: f64, t: f64| barenblatt(&[x], t, &m).unwrap();
            let ut = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
            let uxx = (u(x + h, t) - 2.0 * u(x, t) + u(x - h, t)) / (h * h);
            assert!((ut - uxx).abs() < 1e-5 * (1.0 + ut.abs()), "x={x} t={t}: {ut} vs {uxx}");
        }
    }

    #[test]
    fn freespace_law_values() {
        let m = MetricParams::new(1, 2.0).unwrap();
        let v = freespace_law(&pt(0.0, 0.0), 1.0, &pt(0.0, 98.0), &m).unwrap();
        assert!((v - 100f64.ln()).abs() < 1e-12);
        let v = freespace_law(&pt(0.0, 0.0), 1.0, &pt(10.0, 2.0), &m).unwrap();
        assert!((v - (4f64.ln() + 25.0)).abs() < 1e-12);
        let v = freespace_law(&pt(0.0, 0.0), 1.0, &pt(0.0, 0.0), &m).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert!(freespace_law(&pt(0.0, 0.0), 1.0, &pt(0.0, -2.0), &m).is_err());
        assert!(freespace_law(&pt(0.0, 0.0), 0.0, &pt(0.0, 2.0), &m).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn law_symmetric_and_monotone(off in 0.0..20.0f64, d in 0.01..5.0f64, s in 0.0..100.0f64, p in 1.2..4.0f64) {
                let m = MetricParams::new(1, p).unwrap();
                let o = pt(0.0, 0.0);
                let a = freespace_law(&o, 1.0, &pt(off, s), &m).unwrap();
                let b = freespace_law(&o, 1.0, &pt(-off, s), &m).unwrap();
                prop_assert_eq!(a, b);
                let c = freespace_law(&o, 1.0, &pt(off + d, s), &m).unwrap();
                prop_assert!(c > a);
                // in s, the law increases once the log term dominates
                if off == 0.0 {
                    prop_assert!(freespace_law(&o, 1.0, &pt(0.0, s + d), &m).unwrap() > a);
                }
            }

            #[test]
            fn barenblatt_radially_maximal(x in -5.0..5.0f64, y in -5.0..5.0f64, t in 0.05..10.0f64, p in 1.2..4.0f64) {
                let m = MetricParams::new(2, p).unwrap();
                let u0 = barenblatt(&[0.0, 0.0], t, &m).unwrap();
                let u = barenblatt(&[x, y], t, &m).unwrap();
                if x == 0.0 && y == 0.0 {
                    prop_assert_eq!(u, u0);
                } else {
                    prop_assert!(u < u0);
                }
            }
        }
    }
}
