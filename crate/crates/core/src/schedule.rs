//! Cubic remaining-ratio schedule with initial and final warmup plateaus.

use alloc::format;

use crate::error::{Error, Result};

/// Which numerator the cubic segment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CubicForm {
    /// `(t − tᵢ)`: continuous at both plateau joints.
    #[default]
    Corrected,
    /// `(t − tᵢ − t_f)`: jumps above `r_initial` at `tᵢ` and lands above
    /// `r_final` at `T − t_f`. Kept for comparison only.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ScheduleConfig {
    #[cfg_attr(feature = "serde", serde(default = "default_r_initial"))]
    pub r_initial: f64,
    pub r_final: f64,
    pub t_initial_warmup: usize,
    pub t_final_warmup: usize,
    pub total_steps: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub form: CubicForm,
}

#[cfg(feature = "serde")]
fn default_r_initial() -> f64 {
    1.0
}

impl ScheduleConfig {
    pub fn new(r_final: f64, t_initial_warmup: usize, t_final_warmup: usize, total_steps: usize) -> Self {
        Self {
            r_initial: 1.0,
            r_final,
            t_initial_warmup,
            t_final_warmup,
            total_steps,
            form: CubicForm::Corrected,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (r0, rt) = (self.r_initial, self.r_final);
        if !(rt > 0.0 && rt <= r0 && r0 <= 1.0) {
            return Err(Error::config(format!(
                "schedule ratios violate 0 < r_final <= r_initial <= 1 (r_initial = {r0}, r_final = {rt})"
            )));
        }
        if self.t_initial_warmup + self.t_final_warmup >= self.total_steps {
            return Err(Error::config(format!(
                "schedule warmups violate t_initial_warmup + t_final_warmup < total_steps ({} + {} >= {})",
                self.t_initial_warmup, self.t_final_warmup, self.total_steps
            )));
        }
        Ok(())
    }

    /// Remaining ratio at a (possibly fractional) time in `[0, T]`.
    pub fn ratio_at_time(&self, t: f64) -> Result<f64> {
        self.validate()?;
        let total = self.total_steps as f64;
        if !(0.0..=total).contains(&t) {
            return Err(Error::config(format!("step {t} is outside [0, {total}]")));
        }
        let ti = self.t_initial_warmup as f64;
        let tf = self.t_final_warmup as f64;
        let span = total - ti - tf;
        let (r0, rt) = (self.r_initial, self.r_final);
        Ok(match self.form {
            CubicForm::Corrected => {
                if t <= ti {
                    r0
                } else if t >= total - tf {
                    rt
                } else {
                    let c = 1.0 - (t - ti) / span;
                    (rt + (r0 - rt) * (c * c * c)).clamp(rt, r0)
                }
            }
            CubicForm::Literal => {
                if t < ti {
                    r0
                } else if t >= total - tf {
                    rt
                } else {
                    let c = 1.0 - (t - ti - tf) / span;
                    rt + (r0 - rt) * (c * c * c)
                }
            }
        })
    }
}

/// Remaining ratio `r(t)` at step `t`.
pub fn ratio_at(t: usize, config: &ScheduleConfig) -> Result<f64> {
    config.ratio_at_time(t as f64)
}

/// `ceil(r · d)` clamped to `[1, d]`. Products within `1e-9` (relative) of an
/// integer snap to it, so `0.1 · 100` retains 10 rather than 11.
pub fn retained_count(r: f64, d: usize) -> usize {
    if d == 0 {
        return 0;
    }
    let x = r * d as f64;
    let nearest = libm::round(x);
    let k = if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        libm::ceil(x)
    };
    if k.is_nan() || k < 1.0 {
        1
    } else if k >= d as f64 {
        d
    } else {
        k as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plateaus() {
        let cfg = ScheduleConfig::new(0.1, 10, 20, 100);
        assert_eq!(ratio_at(0, &cfg).unwrap(), 1.0);
        assert_eq!(ratio_at(10, &cfg).unwrap(), 1.0);
        assert_eq!(ratio_at(80, &cfg).unwrap(), 0.1);
        assert_eq!(ratio_at(100, &cfg).unwrap(), 0.1);
    }

    #[test]
    fn cubic_midpoint() {
        let cfg = ScheduleConfig::new(0.1, 0, 0, 10);
        let r = ratio_at(5, &cfg).unwrap();
        assert!((r - 0.2125).abs() < 1e-15, "{r}");
    }

    #[test]
    fn literal_form_jumps_at_the_initial_joint() {
        let mut cfg = ScheduleConfig::new(0.1, 10, 20, 100);
        cfg.r_initial = 0.8;
        cfg.form = CubicForm::Literal;
        let before = ratio_at(9, &cfg).unwrap();
        let at = ratio_at(10, &cfg).unwrap();
        assert_eq!(before, 0.8);
        assert!(at > 0.8 + 0.1, "{at}");
    }

    #[test]
    fn invalid_configs() {
        assert!(ScheduleConfig::new(0.0, 0, 0, 10).validate().is_err());
        assert!(ScheduleConfig::new(1.2, 0, 0, 10).validate().is_err());
        assert!(ScheduleConfig::new(0.5, 5, 5, 10).validate().is_err());
        let mut c = ScheduleConfig::new(0.5, 0, 0, 10);
        c.r_initial = 0.4;
        assert!(c.validate().is_err());
        assert!(ratio_at(11, &ScheduleConfig::new(0.5, 0, 0, 10)).is_err());
    }

    #[test]
    fn retained_count_examples() {
        assert_eq!(retained_count(2.0 / 3.0, 3), 2);
        assert_eq!(retained_count(0.1, 12), 2);
        assert_eq!(retained_count(1.0, 7), 7);
        assert_eq!(retained_count(0.1, 100), 10);
        assert_eq!(retained_count(2.0 / 12.0, 12), 2);
        assert_eq!(retained_count(1e-9, 5), 1);
    }

    proptest! {
        #[test]
        fn retained_count_monotone(a in 1e-6f64..=1.0, b in 1e-6f64..=1.0, d in 1usize..5000) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(retained_count(lo, d) <= retained_count(hi, d));
            prop_assert!(retained_count(lo, d) >= 1);
        }

        #[test]
        fn corrected_schedule_nonincreasing(
            rf in 0.01f64..1.0, r0_extra in 0.0f64..1.0, ti in 0usize..50, tf in 0usize..50, body in 1usize..200,
        ) {
            let mut cfg = ScheduleConfig::new(rf, ti, tf, ti + tf + body);
            cfg.r_initial = rf + (1.0 - rf) * r0_extra;
            let mut prev = f64::INFINITY;
            for t in 0..=cfg.total_steps {
                let r = ratio_at(t, &cfg).unwrap();
                prop_assert!(r <= prev && r > 0.0 && r <= 1.0);
                prev = r;
            }
            prop_assert_eq!(ratio_at(ti, &cfg).unwrap(), cfg.r_initial);
            prop_assert_eq!(ratio_at(cfg.total_steps - tf, &cfg).unwrap(), cfg.r_final);
        }
    }
}
