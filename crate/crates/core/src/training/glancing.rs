use crate::error::{Error, Result};
use crate::model::{ContextBundle, SegmentKind};
use crate::rng::Rng;

/// Instantaneous per-category context-dropping rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlanceRates {
    pub d_rand: f32,
    pub d_web: f32,
    pub d_qp: f32,
    pub d_all: f32,
}

impl GlanceRates {
    pub const ZERO: GlanceRates = GlanceRates {
        d_rand: 0.0,
        d_web: 0.0,
        d_qp: 0.0,
        d_all: 0.0,
    };

    pub fn sum(&self) -> f32 {
        self.d_rand + self.d_web + self.d_qp + self.d_all
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }
}

/// Linear ramp: zero through the warm-up epochs, rising to the per-category
/// maxima at the final epoch.
#[derive(Debug, Clone, Copy)]
pub struct GlanceSchedule {
    pub warmup_epochs: f32,
    pub total_epochs: f32,
    pub max_rates: GlanceRates,
}

impl GlanceSchedule {
    pub fn new(warmup_epochs: f32, total_epochs: f32, max_rates: GlanceRates) -> Result<Self> {
        if warmup_epochs >= total_epochs {
            return Err(Error::Config(format!(
                "glance warmup {warmup_epochs} must precede total epochs {total_epochs}"
            )));
        }
        let rates = [
            max_rates.d_rand,
            max_rates.d_web,
            max_rates.d_qp,
            max_rates.d_all,
        ];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Config("glance max rates must lie in [0,1]".into()));
        }
        if max_rates.sum() > 1.0 {
            return Err(Error::Config(format!(
                "glance category rates sum to {} > 1",
                max_rates.sum()
            )));
        }
        Ok(GlanceSchedule {
            warmup_epochs,
            total_epochs,
            max_rates,
        })
    }

    /// Defaults: 3 warm-up epochs of 10, every category capped at 10%.
    pub fn default_for(total_epochs: f32) -> Self {
        let cap = GlanceRates {
            d_rand: 0.10,
            d_web: 0.10,
            d_qp: 0.10,
            d_all: 0.10,
        };
        GlanceSchedule {
            warmup_epochs: 3.0_f32.min(total_epochs * 0.3),
            total_epochs,
            max_rates: cap,
        }
    }

    /// No dropping at any epoch (the "without glancing" training arm).
    pub fn disabled(total_epochs: f32) -> Self {
        GlanceSchedule {
            warmup_epochs: total_epochs * 0.3,
            total_epochs,
            max_rates: GlanceRates::ZERO,
        }
    }

    pub fn rates(&self, epoch: f32) -> GlanceRates {
        let frac = ((epoch - self.warmup_epochs) / (self.total_epochs - self.warmup_epochs))
            .clamp(0.0, 1.0);
        GlanceRates {
            d_rand: self.max_rates.d_rand * frac,
            d_web: self.max_rates.d_web * frac,
            d_qp: self.max_rates.d_qp * frac,
            d_all: self.max_rates.d_all * frac,
        }
    }
}

/// Outcome of the per-query categorical draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlanceCategory {
    Keep,
    All,
    Web,
    Qp,
    Rand,
}

/// Single categorical draw; categories are mutually exclusive.
pub fn draw_category(rates: &GlanceRates, u: f32) -> GlanceCategory {
    let mut edge = rates.d_all;
    if u < edge {
        return GlanceCategory::All;
    }
    edge += rates.d_web;
    if u < edge {
        return GlanceCategory::Web;
    }
    edge += rates.d_qp;
    if u < edge {
        return GlanceCategory::Qp;
    }
    edge += rates.d_rand;
    if u < edge {
        return GlanceCategory::Rand;
    }
    GlanceCategory::Keep
}

/// Apply one glancing draw to a bundle. The query segment always survives;
/// contexts are dropped whole and never duplicated.
pub fn apply_glancing(bundle: &ContextBundle, rates: &GlanceRates, rng: &mut Rng) -> ContextBundle {
    let category = draw_category(rates, rng.next_f32());
    let keep = |bundle: &ContextBundle, pred: &dyn Fn(&SegmentKind) -> bool| -> ContextBundle {
        ContextBundle {
            query: bundle.query.clone(),
            contexts: bundle
                .contexts
                .iter()
                .filter(|c| pred(&c.kind))
                .cloned()
                .collect(),
        }
    };
    match category {
        GlanceCategory::Keep => bundle.clone(),
        GlanceCategory::All => keep(bundle, &|_| false),
        GlanceCategory::Web => keep(bundle, &|k| {
            !matches!(k, SegmentKind::WebTitle | SegmentKind::WebSnippet)
        }),
        GlanceCategory::Qp => keep(bundle, &|k| {
            !matches!(k, SegmentKind::QpRewrite | SegmentKind::QpIntent)
        }),
        GlanceCategory::Rand => {
            let n = bundle.n();
            if n == 0 {
                return bundle.clone();
            }
            let k = 1 + rng.next_below(n);
            let drop = rng.sample_indices(n, k);
            let mut contexts = Vec::with_capacity(n - k);
            let mut di = 0;
            for (i, ctx) in bundle.contexts.iter().enumerate() {
                if di < drop.len() && drop[di] == i {
                    di += 1;
                } else {
                    contexts.push(ctx.clone());
                }
            }
            ContextBundle {
                query: bundle.query.clone(),
                contexts,
            }
        }
    }
}
