use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    /// Multiply by `factor` at each milestone epoch.
    StepDecay { milestones: Vec<usize>, factor: f64 },
    /// Linear ramp from `warmup_start` to the initial rate over
    /// `warmup_epochs`, then step decay.
    LinearWarmupThenStep {
        warmup_epochs: usize,
        warmup_start: f64,
        milestones: Vec<usize>,
        factor: f64,
    },
    /// Half-cosine from the initial rate to 0 at `t_max`, held at 0 after.
    CosineAnnealing { t_max: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial_lr: f64,
    pub kind: ScheduleKind,
}

impl LrSchedule {
    pub fn constant(initial_lr: f64) -> Self {
        Self {
            initial_lr,
            kind: ScheduleKind::Constant,
        }
    }

    pub fn step_decay(initial_lr: f64, milestones: &[usize], factor: f64) -> Self {
        Self {
            initial_lr,
            kind: ScheduleKind::StepDecay {
                milestones: milestones.to_vec(),
                factor,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "initial learning rate must be positive, got {}",
                self.initial_lr
            )));
        }
        let check_steps = |milestones: &[usize], factor: f64| -> Result<()> {
            if milestones.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(
                    "milestones must be strictly increasing".into(),
                ));
            }
            if !(factor > 0.0 && factor < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "decay factor must be in (0, 1), got {factor}"
                )));
            }
            Ok(())
        };
        match &self.kind {
            ScheduleKind::Constant => Ok(()),
            ScheduleKind::StepDecay { milestones, factor } => check_steps(milestones, *factor),
            ScheduleKind::LinearWarmupThenStep {
                warmup_start,
                milestones,
                factor,
                ..
            } => {
                if !(*warmup_start > 0.0) {
                    return Err(Error::InvalidArgument("warmup start must be positive".into()));
                }
                check_steps(milestones, *factor)
            }
            ScheduleKind::CosineAnnealing { t_max } => {
                if *t_max == 0 {
                    return Err(Error::InvalidArgument("cosine t_max must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Learning rate for a 0-based epoch index.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let stepped = |milestones: &[usize], factor: f64| {
            let passed = milestones.iter().filter(|&&m| epoch >= m).count();
            self.initial_lr * factor.powi(passed as i32)
        };
        match &self.kind {
            ScheduleKind::Constant => self.initial_lr,
            ScheduleKind::StepDecay { milestones, factor } => stepped(milestones, *factor),
            ScheduleKind::LinearWarmupThenStep {
                warmup_epochs,
                warmup_start,
                milestones,
                factor,
            } => {
                if epoch < *warmup_epochs {
                    let t = epoch as f64 / *warmup_epochs as f64;
                    warmup_start + (self.initial_lr - warmup_start) * t
                } else {
                    stepped(milestones, *factor)
                }
            }
            ScheduleKind::CosineAnnealing { t_max } => {
                if epoch >= *t_max {
                    return 0.0;
                }
                let t = epoch as f64 / *t_max as f64;
                0.5 * self.initial_lr * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

/// Learning rate of `schedule` at a 0-based epoch.
pub fn lr_at(schedule: &LrSchedule, epoch: usize) -> f64 {
    schedule.lr_at(epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_decay_multiplies_at_milestones() {
        let s = LrSchedule::step_decay(0.1, &[30, 60, 80], 0.2);
        assert_eq!(s.lr_at(0), 0.1);
        assert_eq!(s.lr_at(29), 0.1);
        assert!((s.lr_at(30) - 0.02).abs() < 1e-15);
        assert!((s.lr_at(60) - 0.004).abs() < 1e-15);
        assert!((s.lr_at(99) - 0.0008).abs() < 1e-15);
    }

    #[test]
    fn warmup_starts_low() {
        let s = LrSchedule {
            initial_lr: 0.1,
            kind: ScheduleKind::LinearWarmupThenStep {
                warmup_epochs: 5,
                warmup_start: 0.02,
                milestones: vec![160, 180],
                factor: 0.1,
            },
        };
        s.validate().unwrap();
        assert_eq!(s.lr_at(0), 0.02);
        assert!(s.lr_at(1) > 0.02 && s.lr_at(4) < 0.1);
        assert_eq!(s.lr_at(5), 0.1);
        assert!((s.lr_at(160) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn cosine_reaches_zero() {
        let s = LrSchedule {
            initial_lr: 0.1,
            kind: ScheduleKind::CosineAnnealing { t_max: 100 },
        };
        assert_eq!(s.lr_at(0), 0.1);
        assert!((s.lr_at(50) - 0.05).abs() < 1e-15);
        assert_eq!(s.lr_at(100), 0.0);
        assert_eq!(s.lr_at(150), 0.0);
    }

    #[test]
    fn non_increasing_after_warmup() {
        let cos = LrSchedule {
            initial_lr: 0.1,
            kind: ScheduleKind::CosineAnnealing { t_max: 40 },
        };
        let step = LrSchedule::step_decay(0.1, &[3, 7, 20], 0.5);
        for s in [cos, step] {
            for e in 0..60 {
                assert!(s.lr_at(e + 1) <= s.lr_at(e));
            }
        }
    }

    #[test]
    fn invalid_schedules() {
        assert!(LrSchedule::step_decay(0.1, &[30, 30], 0.2).validate().is_err());
        assert!(LrSchedule::step_decay(0.1, &[30], 1.5).validate().is_err());
        assert!(LrSchedule::step_decay(0.0, &[30], 0.2).validate().is_err());
    }
}
