use std::path::Path;

use crate::error::{Error, Result};
use crate::model::UnityModel;
use crate::rng::Rng;
use crate::training::glancing::{apply_glancing, GlanceRates, GlanceSchedule};
use crate::training::losses::{combined_loss, LossWeights, TrainingPair};
use crate::training::optimizer::OptimizerState;

/// Everything the train subcommand reads from its key=value config file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub profile: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub warmup_steps: usize,
    pub lambda: f32,
    pub max_rates: GlanceRates,
    pub warmup_epochs: f32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            profile: "desk".into(),
            epochs: 10,
            batch_size: 16,
            lr: 3e-4,
            warmup_steps: 30,
            lambda: 1.0,
            max_rates: GlanceRates {
                d_rand: 0.10,
                d_web: 0.10,
                d_qp: 0.10,
                d_all: 0.10,
            },
            warmup_epochs: 3.0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    /// Parse `key = value` lines; `#` starts a comment; unknown keys are
    /// rejected.
    pub fn from_str(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    /// Apply one key=value override (also used for CLI --set flags).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid {what} value '{value}'"));
        match key {
            "profile" => self.profile = value.to_string(),
            "epochs" => self.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
            "lr" => self.lr = value.parse().map_err(|_| bad("lr"))?,
            "warmup_steps" => {
                self.warmup_steps = value.parse().map_err(|_| bad("warmup_steps"))?
            }
            "lambda" => self.lambda = value.parse().map_err(|_| bad("lambda"))?,
            "d_rand_max" => self.max_rates.d_rand = value.parse().map_err(|_| bad("d_rand_max"))?,
            "d_web_max" => self.max_rates.d_web = value.parse().map_err(|_| bad("d_web_max"))?,
            "d_qp_max" => self.max_rates.d_qp = value.parse().map_err(|_| bad("d_qp_max"))?,
            "d_all_max" => self.max_rates.d_all = value.parse().map_err(|_| bad("d_all_max"))?,
            "warmup_epochs" => {
                self.warmup_epochs = value.parse().map_err(|_| bad("warmup_epochs"))?
            }
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// All category maxima zeroed (--no-glancing arm).
    pub fn without_glancing(mut self) -> Self {
        self.max_rates = GlanceRates::ZERO;
        self
    }

    pub fn schedule(&self) -> Result<GlanceSchedule> {
        GlanceSchedule::new(self.warmup_epochs, self.epochs as f32, self.max_rates)
    }
}

/// Per-epoch training telemetry (one CSV row).
#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub nlg_loss: f32,
    pub dr_loss: f32,
    pub rates: GlanceRates,
    pub lr: f32,
}

pub const STATS_HEADER: &str = "epoch,nlg_loss,dr_loss,d_rand,d_web,d_qp,d_all,lr";

pub fn stats_csv(stats: &[EpochStats]) -> String {
    let mut out = String::from(STATS_HEADER);
    out.push('\n');
    for s in stats {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.8}\n",
            s.epoch,
            s.nlg_loss,
            s.dr_loss,
            s.rates.d_rand,
            s.rates.d_web,
            s.rates.d_qp,
            s.rates.d_all,
            s.lr
        ));
    }
    out
}

/// One pass over the dataset: shuffled batches, per-pair glancing at the
/// current step's interpolated epoch, one Adam step per batch.
pub fn train_epoch(
    model: &mut UnityModel,
    dataset: &[TrainingPair],
    schedule: &GlanceSchedule,
    optimizer: &mut OptimizerState,
    rng: &Rng,
    epoch: usize,
    batch_size: usize,
    weights: &LossWeights,
) -> Result<EpochStats> {
    if dataset.is_empty() {
        return Err(Error::Contract("train_epoch: empty dataset".into()));
    }
    let steps_per_epoch = dataset.len().div_ceil(batch_size);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    rng.derive("shuffle").derive_u64(epoch as u64).shuffle(&mut order);
    let mut glance_rng = rng.derive("glance").derive_u64(epoch as u64);

    let mut nlg_sum = 0.0f64;
    let mut dr_sum = 0.0f64;
    let mut pair_count = 0usize;
    let mut last_rates = GlanceRates::ZERO;
    let mut last_lr = 0.0f32;

    for batch_ids in order.chunks(batch_size) {
        let epoch_float = optimizer.step as f32 / steps_per_epoch as f32;
        let rates = schedule.rates(epoch_float);
        last_rates = rates;
        let batch: Vec<TrainingPair> = batch_ids
            .iter()
            .map(|&i| {
                let p = &dataset[i];
                TrainingPair {
                    bundle: apply_glancing(&p.bundle, &rates, &mut glance_rng),
                    keyword: p.keyword.clone(),
                    match_type: p.match_type,
                }
            })
            .collect();

        let (loss_val, nlg_mean, dr_mean, grads) = {
            let mut tape = model.tape();
            let out = combined_loss(model, &mut tape, &batch, weights)?;
            let loss_val = tape.value(out.loss)[0];
            let grads = tape.backward(out.loss)?;
            (loss_val, out.nlg_mean, out.dr_mean, grads.into_param_grads())
        };
        if !loss_val.is_finite() {
            return Err(Error::NanAbort {
                step: optimizer.step + 1,
                batch_ids: batch_ids.to_vec(),
            });
        }
        last_lr = optimizer.apply(&mut model.params, &grads)?;
        nlg_sum += nlg_mean as f64 * batch.len() as f64;
        dr_sum += dr_mean as f64 * batch.len() as f64;
        pair_count += batch.len();
    }

    Ok(EpochStats {
        epoch,
        nlg_loss: (nlg_sum / pair_count as f64) as f32,
        dr_loss: (dr_sum / pair_count as f64) as f32,
        rates: last_rates,
        lr: last_lr,
    })
}

/// Full training run driven by a TrainConfig; the model must already match
/// the config's profile.
pub fn train_run(
    model: &mut UnityModel,
    dataset: &[TrainingPair],
    config: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    let schedule = config.schedule()?;
    let steps_per_epoch = dataset.len().div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let mut optimizer = OptimizerState::new(&model.params, config.lr, config.warmup_steps, total_steps);
    let weights = LossWeights { lambda: config.lambda };
    let rng = Rng::new(config.seed).derive("train");
    let mut stats = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        stats.push(train_epoch(
            model,
            dataset,
            &schedule,
            &mut optimizer,
            &rng,
            epoch,
            config.batch_size,
            &weights,
        )?);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ContextBundle, MaxLens, ModelConfig, SegmentKind, TokenSegment};

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            num_encoder_layers: 1,
            num_decoder_layers: 1,
            hidden_size: 16,
            dense_size: 8,
            vocab_size: 32,
            num_heads: 2,
            ffn_size: 32,
            max_len: MaxLens { query: 4, title: 4, snippet: 4, rewrite: 4, intent: 4 },
        }
    }

    fn tiny_dataset(cfg: &ModelConfig) -> Vec<TrainingPair> {
        let mut out = Vec::new();
        for i in 0..6u32 {
            let q = TokenSegment::new(SegmentKind::Query, vec![8 + i, 9 + i], 0, cfg)
                .unwrap()
                .padded_to(cfg.max_len.query);
            let ctx = TokenSegment::new(SegmentKind::WebTitle, vec![3, 20 + i], 0, cfg).unwrap();
            let kw = TokenSegment::new(SegmentKind::Query, vec![15 + i, 16 + i], 0, cfg).unwrap();
            out.push(TrainingPair {
                bundle: ContextBundle::new(q, vec![ctx]).unwrap(),
                keyword: kw,
                match_type: crate::training::MatchType::Exact,
            });
        }
        out
    }

    #[test]
    fn config_parse_and_unknown_key() {
        let cfg = TrainConfig::from_str(
            "profile = desk\nepochs= 4\n# comment\nlr = 0.001\nd_all_max = 0.2\nseed=7\n",
        )
        .unwrap();
        assert_eq!(cfg.epochs, 4);
        assert!((cfg.lr - 0.001).abs() < 1e-9);
        assert!((cfg.max_rates.d_all - 0.2).abs() < 1e-9);
        assert_eq!(cfg.seed, 7);
        assert!(matches!(
            TrainConfig::from_str("bogus = 1\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let cfg = tiny_config();
        let dataset = tiny_dataset(&cfg);
        let train_cfg = TrainConfig {
            profile: "tiny".into(),
            epochs: 8,
            batch_size: 3,
            lr: 3e-3,
            warmup_steps: 4,
            lambda: 1.0,
            warmup_epochs: 2.0,
            seed: 11,
            ..TrainConfig::default()
        };
        let run = || {
            let mut model = UnityModel::new(cfg.clone(), 11).unwrap();
            let stats = train_run(&mut model, &dataset, &train_cfg).unwrap();
            (model, stats)
        };
        let (m1, s1) = run();
        let (m2, s2) = run();
        // loss went down
        assert!(
            s1.last().unwrap().nlg_loss < s1.first().unwrap().nlg_loss,
            "nlg {} -> {}",
            s1.first().unwrap().nlg_loss,
            s1.last().unwrap().nlg_loss
        );
        // bit-identical across runs
        for i in 0..m1.params.len() {
            assert!(m1
                .params
                .get(i)
                .data
                .iter()
                .zip(&m2.params.get(i).data)
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        assert_eq!(stats_csv(&s1), stats_csv(&s2));
    }

    #[test]
    fn stats_csv_shape() {
        let s = EpochStats {
            epoch: 0,
            nlg_loss: 1.5,
            dr_loss: 0.25,
            rates: GlanceRates::ZERO,
            lr: 3e-4,
        };
        let csv = stats_csv(&[s]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), STATS_HEADER);
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 8);
        assert!(row.starts_with("0,1.500000,0.250000,"));
    }

    #[test]
    fn no_glancing_config_zeroes_rates() {
        let cfg = TrainConfig::default().without_glancing();
        assert_eq!(cfg.max_rates, GlanceRates::ZERO);
        let sched = cfg.schedule().unwrap();
        assert_eq!(sched.rates(9.0), GlanceRates::ZERO);
    }
}
