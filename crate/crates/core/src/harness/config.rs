//! Run configuration and its `key = value` file format.
//!
//! ```text
//! run.seed = 7
//! run.epochs = 100
//! run.batch_size = 128
//! model.encoder = "mlp"
//! model.hidden = [64, 32]
//! optim.lr = 0.1
//! optim.milestones = [30, 60, 80]
//! data.source = "gaussian"
//! data.imb_factor = 200.0
//! strategy.kind = "am_mixup"
//! ```
//!
//! Keys may also be grouped under `[model]`-style section headers. Unknown
//! keys, wrong value types and missing required keys are reported as
//! [`Error::Config`] with the dotted key path.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::augment::{AmConfig, AugmentStrategy, RateMode};
use crate::data::{CoarseMap, ImbalanceSpec};
use crate::error::{Error, Result};
use crate::metrics::SplitThresholds;
use crate::network::{EncoderSpec, LrSchedule, ModelSpec, ScheduleKind};

#[derive(Clone, Debug, PartialEq)]
pub struct OptimConfig {
    pub momentum: f64,
    pub weight_decay: f64,
    pub schedule: LrSchedule,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            weight_decay: 5e-4,
            schedule: LrSchedule::step_decay(0.1, &[30, 60, 80], 0.2),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    /// Seeded Gaussian clusters, see [`crate::data::gaussian_toy`].
    Gaussian {
        classes: usize,
        per_class_n: usize,
        dim: usize,
        spread: f64,
    },
    /// Pre-split dataset files (binary `.clab` or `.csv`).
    Files { train: PathBuf, test: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub source: DataSource,
    /// Long-tail subsampling of the training split.
    pub imbalance: Option<ImbalanceSpec>,
    /// Superclass relabelling of both splits.
    pub coarse: Option<CoarseMap>,
    pub thresholds: SplitThresholds,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Gaussian {
                classes: 4,
                per_class_n: 2500,
                dim: 2,
                spread: 0.5,
            },
            imbalance: None,
            coarse: None,
            thresholds: SplitThresholds { many: 400, few: 80 },
        }
    }
}

impl DataConfig {
    /// Class count of the raw (pre-coarsening) data, when known without IO.
    fn source_classes(&self) -> Option<usize> {
        match &self.source {
            DataSource::Gaussian { classes, .. } => Some(*classes),
            DataSource::Files { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub optim: OptimConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub data: DataConfig,
    pub strategy: AugmentStrategy,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    /// The desk-scale baseline: 4-class 2-D Gaussian toy, MLP 2→64→32→2,
    /// 100 epochs of SGD.
    fn default() -> Self {
        Self {
            model: ModelSpec::mlp(2, &[64, 32], 2, 4),
            optim: OptimConfig::default(),
            epochs: 100,
            batch_size: 128,
            data: DataConfig::default(),
            strategy: AugmentStrategy::None,
            seed: 0,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |k: &str, e: Error| match e {
            Error::InvalidArgument(m) => Error::config(k, m),
            other => other,
        };
        self.model.validate().map_err(|e| cfg("model", e))?;
        self.optim.schedule.validate().map_err(|e| cfg("optim", e))?;
        if !(self.optim.momentum >= 0.0 && self.optim.momentum < 1.0) {
            return Err(Error::config("optim.momentum", "must lie in [0, 1)"));
        }
        if !(self.optim.weight_decay >= 0.0 && self.optim.weight_decay.is_finite()) {
            return Err(Error::config("optim.weight_decay", "must be >= 0"));
        }
        self.strategy.validate().map_err(|e| cfg("strategy", e))?;
        if self.batch_size == 0 {
            return Err(Error::config("run.batch_size", "must be positive"));
        }
        if self.strategy.mixes() && self.batch_size < 2 {
            return Err(Error::config(
                "run.batch_size",
                "mixing strategies need batches of at least 2",
            ));
        }
        if self.data.thresholds.many <= self.data.thresholds.few {
            return Err(Error::config(
                "data.many_threshold",
                "must exceed data.few_threshold",
            ));
        }
        if let Some(imb) = &self.data.imbalance {
            if !(imb.imb_factor >= 1.0 && imb.imb_factor.is_finite()) {
                return Err(Error::config("data.imb_factor", "must be >= 1"));
            }
        }
        if let Some(classes) = self.data.source_classes() {
            if let Some(map) = &self.data.coarse {
                if map.num_fine() != classes {
                    return Err(Error::config(
                        "data.coarse_map",
                        format!("covers {} classes, data has {classes}", map.num_fine()),
                    ));
                }
            }
            let want = self.data.coarse.as_ref().map_or(classes, CoarseMap::num_coarse);
            if self.model.num_classes != want {
                return Err(Error::config(
                    "model.num_classes",
                    format!("{} does not match the data's {want} classes", self.model.num_classes),
                ));
            }
        }
        if let (DataSource::Gaussian { dim, .. }, EncoderSpec::Mlp { input_dim, .. }) =
            (&self.data.source, &self.model.encoder)
        {
            if dim != input_dim {
                return Err(Error::config(
                    "model.input_dim",
                    format!("{input_dim} does not match data.dim {dim}"),
                ));
            }
        }
        if let (DataSource::Gaussian { .. }, EncoderSpec::CnnVis2d { .. }) =
            (&self.data.source, &self.model.encoder)
        {
            return Err(Error::config(
                "model.encoder",
                "cnn_vis2d needs image data files, not the gaussian generator",
            ));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::config(format!("<line {line}>"), e.message().trim().to_string())
        })?;
        let mut root = Section::root(table);
        let run = root.section("run")?;
        let model = root.section("model")?;
        let optim = root.section("optim")?;
        let data = root.section("data")?;
        let strategy = root.section("strategy")?;
        root.finish()?;

        let data = parse_data(data)?;
        let (mut run, defaults) = (run, RunConfig::default());
        let cfg = RunConfig {
            seed: run.seed("seed")?.unwrap_or(defaults.seed),
            epochs: run.usize("epochs")?.unwrap_or(defaults.epochs),
            batch_size: run.usize("batch_size")?.unwrap_or(defaults.batch_size),
            output_dir: run.string("output_dir")?.map(PathBuf::from),
            model: parse_model(model, &data)?,
            optim: parse_optim(optim)?,
            strategy: parse_strategy(strategy)?,
            data,
        };
        run.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; `parse(to_config_string())` reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let mut w = Writer::default();
        w.int("run.seed", self.seed);
        w.int("run.epochs", self.epochs as u64);
        w.int("run.batch_size", self.batch_size as u64);
        if let Some(dir) = &self.output_dir {
            w.str("run.output_dir", &dir.to_string_lossy());
        }
        match &self.model.encoder {
            EncoderSpec::Mlp { input_dim, hidden } => {
                w.str("model.encoder", "mlp");
                w.int("model.input_dim", *input_dim as u64);
                w.list("model.hidden", hidden);
            }
            EncoderSpec::CnnVis2d {
                in_channels,
                height,
                width,
                channels,
            } => {
                w.str("model.encoder", "cnn_vis2d");
                w.int("model.in_channels", *in_channels as u64);
                w.int("model.height", *height as u64);
                w.int("model.width", *width as u64);
                w.list("model.channels", channels);
            }
        }
        w.int("model.feature_dim", self.model.feature_dim as u64);
        w.int("model.num_classes", self.model.num_classes as u64);

        let s = &self.optim.schedule;
        w.float("optim.lr", s.initial_lr);
        w.float("optim.momentum", self.optim.momentum);
        w.float("optim.weight_decay", self.optim.weight_decay);
        match &s.kind {
            ScheduleKind::Constant => w.str("optim.schedule", "constant"),
            ScheduleKind::StepDecay { milestones, factor } => {
                w.str("optim.schedule", "step");
                w.list("optim.milestones", milestones);
                w.float("optim.factor", *factor);
            }
            ScheduleKind::LinearWarmupThenStep {
                warmup_epochs,
                warmup_start,
                milestones,
                factor,
            } => {
                w.str("optim.schedule", "warmup_step");
                w.int("optim.warmup_epochs", *warmup_epochs as u64);
                w.float("optim.warmup_start", *warmup_start);
                w.list("optim.milestones", milestones);
                w.float("optim.factor", *factor);
            }
            ScheduleKind::CosineAnnealing { t_max } => {
                w.str("optim.schedule", "cosine");
                w.int("optim.t_max", *t_max as u64);
            }
        }

        match &self.data.source {
            DataSource::Gaussian {
                classes,
                per_class_n,
                dim,
                spread,
            } => {
                w.str("data.source", "gaussian");
                w.int("data.classes", *classes as u64);
                w.int("data.per_class_n", *per_class_n as u64);
                w.int("data.dim", *dim as u64);
                w.float("data.spread", *spread);
            }
            DataSource::Files { train, test } => {
                w.str("data.source", "files");
                w.str("data.train", &train.to_string_lossy());
                w.str("data.test", &test.to_string_lossy());
            }
        }
        if let Some(imb) = &self.data.imbalance {
            w.float("data.imb_factor", imb.imb_factor);
            w.int("data.n_max", imb.n_max as u64);
        }
        if let Some(map) = &self.data.coarse {
            w.list("data.coarse_map", map.as_slice());
        }
        w.int("data.many_threshold", self.data.thresholds.many as u64);
        w.int("data.few_threshold", self.data.thresholds.few as u64);

        match &self.strategy {
            AugmentStrategy::None => w.str("strategy.kind", "none"),
            AugmentStrategy::Mixup { alpha } => {
                w.str("strategy.kind", "mixup");
                w.float("strategy.alpha", *alpha);
            }
            AugmentStrategy::ManifoldMixup {
                alpha,
                eligible_layers,
            } => {
                w.str("strategy.kind", "manifold_mixup");
                w.float("strategy.alpha", *alpha);
                if let Some(layers) = eligible_layers {
                    w.list("strategy.eligible_layers", layers);
                }
            }
            AugmentStrategy::AmMixup(am) => {
                w.str("strategy.kind", "am_mixup");
                w.float("strategy.beta", am.beta);
                match am.rate_mode {
                    RateMode::Scheduled => w.str("strategy.rate_mode", "scheduled"),
                    RateMode::FixedBeta { alpha } => {
                        w.str("strategy.rate_mode", "fixed_beta");
                        w.float("strategy.alpha", alpha);
                    }
                    RateMode::Fixed(v) => {
                        w.str("strategy.rate_mode", "fixed");
                        w.float("strategy.rate", v);
                    }
                }
                w.bool("strategy.one_sided", am.one_sided);
                w.bool("strategy.last_layer_only", am.last_layer_only);
            }
        }
        w.out
    }
}

#[derive(Default)]
struct Writer {
    out: String,
}

impl Writer {
    fn line(&mut self, key: &str, value: std::fmt::Arguments) {
        let _ = writeln!(self.out, "{key} = {value}");
    }

    fn int(&mut self, key: &str, v: u64) {
        if v > i64::MAX as u64 {
            // TOML integers are signed 64-bit
            self.line(key, format_args!("\"{v}\""));
        } else {
            self.line(key, format_args!("{v}"));
        }
    }

    fn float(&mut self, key: &str, v: f64) {
        // `{:?}` prints the shortest round-tripping form and keeps a `.0`
        self.line(key, format_args!("{v:?}"));
    }

    fn bool(&mut self, key: &str, v: bool) {
        self.line(key, format_args!("{v}"));
    }

    fn str(&mut self, key: &str, v: &str) {
        let quoted = Value::String(v.to_string()).to_string();
        self.line(key, format_args!("{quoted}"));
    }

    fn list(&mut self, key: &str, v: &[usize]) {
        let items: Vec<String> = v.iter().map(usize::to_string).collect();
        self.line(key, format_args!("[{}]", items.join(", ")));
    }
}

/// One config section; every key must be consumed before [`Section::finish`].
struct Section {
    prefix: String,
    table: Table,
}

impl Section {
    fn root(table: Table) -> Self {
        Self {
            prefix: String::new(),
            table,
        }
    }

    fn path(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    fn section(&mut self, name: &str) -> Result<Section> {
        let table = match self.table.remove(name) {
            None => Table::new(),
            Some(Value::Table(t)) => t,
            Some(_) => return Err(Error::config(self.path(name), "expected a section of keys")),
        };
        Ok(Section {
            prefix: self.path(name),
            table,
        })
    }

    fn finish(self) -> Result<()> {
        match self.table.keys().next() {
            Some(k) => Err(Error::config(self.path(k), "unknown key")),
            None => Ok(()),
        }
    }

    fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.table.remove(key)
    }

    fn type_err(&self, key: &str, want: &str, got: &Value) -> Error {
        Error::config(self.path(key), format!("expected {want}, got {}", got.type_str()))
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as usize)),
            Some(Value::Integer(i)) => {
                Err(Error::config(self.path(key), format!("expected a non-negative integer, got {i}")))
            }
            Some(v) => Err(self.type_err(key, "an integer", &v)),
        }
    }

    fn seed(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as u64)),
            Some(Value::String(s)) => s
                .parse()
                .map(Some)
                .map_err(|_| Error::config(self.path(key), format!("`{s}` is not a u64"))),
            Some(v) => Err(self.type_err(key, "a non-negative integer", &v)),
        }
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(f)),
            Some(Value::Integer(i)) => Ok(Some(i as f64)),
            Some(v) => Err(self.type_err(key, "a number", &v)),
        }
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(b)),
            Some(v) => Err(self.type_err(key, "true or false", &v)),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(self.type_err(key, "a string", &v)),
        }
    }

    fn usizes(&mut self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .into_iter()
                .map(|v| match v {
                    Value::Integer(i) if i >= 0 => Ok(i as usize),
                    other => Err(self.type_err(key, "a list of non-negative integers", &other)),
                })
                .collect::<Result<_>>()
                .map(Some),
            Some(v) => Err(self.type_err(key, "a list", &v)),
        }
    }

    fn required<T>(&self, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| Error::config(self.path(key), "missing required key"))
    }

    fn choice<'a>(&mut self, key: &str, allowed: &[&'a str], default: &'a str) -> Result<&'a str> {
        match self.string(key)? {
            None => Ok(default),
            Some(s) => allowed.iter().copied().find(|a| *a == s).ok_or_else(|| {
                Error::config(
                    self.path(key),
                    format!("unknown value `{s}`, expected one of {allowed:?}"),
                )
            }),
        }
    }
}

fn parse_data(mut s: Section) -> Result<DataConfig> {
    let defaults = DataConfig::default();
    let source = match s.choice("source", &["gaussian", "files"], "gaussian")? {
        "gaussian" => {
            let DataSource::Gaussian {
                classes,
                per_class_n,
                dim,
                spread,
            } = defaults.source
            else {
                unreachable!()
            };
            DataSource::Gaussian {
                classes: s.usize("classes")?.unwrap_or(classes),
                per_class_n: s.usize("per_class_n")?.unwrap_or(per_class_n),
                dim: s.usize("dim")?.unwrap_or(dim),
                spread: s.f64("spread")?.unwrap_or(spread),
            }
        }
        _ => {
            let train = s.string("train")?;
            let test = s.string("test")?;
            DataSource::Files {
                train: s.required("train", train)?.into(),
                test: s.required("test", test)?.into(),
            }
        }
    };
    let imbalance = match (s.f64("imb_factor")?, s.usize("n_max")?) {
        (None, None) => None,
        (Some(imb_factor), n_max) => Some(ImbalanceSpec {
            imb_factor,
            n_max: match (n_max, &source) {
                (Some(n), _) => n,
                (None, DataSource::Gaussian { per_class_n, .. }) => per_class_n * 4 / 5,
                (None, DataSource::Files { .. }) => {
                    return Err(Error::config(s.path("n_max"), "required with data files"))
                }
            },
        }),
        (None, Some(_)) => {
            return Err(Error::config(s.path("imb_factor"), "required when n_max is set"))
        }
    };
    let coarse = match s.usizes("coarse_map")? {
        None => None,
        Some(map) => Some(
            CoarseMap::new(map).map_err(|e| Error::config(s.path("coarse_map"), e.to_string()))?,
        ),
    };
    let thresholds = SplitThresholds {
        many: s.usize("many_threshold")?.unwrap_or(defaults.thresholds.many),
        few: s.usize("few_threshold")?.unwrap_or(defaults.thresholds.few),
    };
    s.finish()?;
    Ok(DataConfig {
        source,
        imbalance,
        coarse,
        thresholds,
    })
}

fn parse_model(mut s: Section, data: &DataConfig) -> Result<ModelSpec> {
    let encoder = match s.choice("encoder", &["mlp", "cnn_vis2d"], "mlp")? {
        "mlp" => {
            let input_dim = match (s.usize("input_dim")?, &data.source) {
                (Some(d), _) => d,
                (None, DataSource::Gaussian { dim, .. }) => *dim,
                (None, _) => return Err(Error::config(s.path("input_dim"), "missing required key")),
            };
            EncoderSpec::Mlp {
                input_dim,
                hidden: s.usizes("hidden")?.unwrap_or_else(|| vec![64, 32]),
            }
        }
        _ => {
            let (c, h, w) = (
                s.usize("in_channels")?.unwrap_or(3),
                s.usize("height")?.unwrap_or(32),
                s.usize("width")?.unwrap_or(32),
            );
            EncoderSpec::CnnVis2d {
                in_channels: c,
                height: h,
                width: w,
                channels: s.usizes("channels")?.unwrap_or_else(|| vec![32, 64, 128]),
            }
        }
    };
    for key in ["input_dim", "hidden", "in_channels", "height", "width", "channels"] {
        if s.has(key) {
            return Err(Error::config(s.path(key), "does not apply to this encoder"));
        }
    }
    let default_classes = data
        .coarse
        .as_ref()
        .map(CoarseMap::num_coarse)
        .or(data.source_classes());
    let num_classes = s.usize("num_classes")?;
    let num_classes = match num_classes.or(default_classes) {
        Some(n) => n,
        None => return Err(Error::config(s.path("num_classes"), "missing required key")),
    };
    let spec = ModelSpec {
        encoder,
        feature_dim: s.usize("feature_dim")?.unwrap_or(2),
        num_classes,
    };
    s.finish()?;
    Ok(spec)
}

fn parse_optim(mut s: Section) -> Result<OptimConfig> {
    let defaults = OptimConfig::default();
    let lr = s.f64("lr")?.unwrap_or(defaults.schedule.initial_lr);
    let momentum = s.f64("momentum")?.unwrap_or(defaults.momentum);
    let weight_decay = s.f64("weight_decay")?.unwrap_or(defaults.weight_decay);
    let kind = match s.choice("schedule", &["step", "constant", "warmup_step", "cosine"], "step")? {
        "constant" => ScheduleKind::Constant,
        "cosine" => {
            let t = s.usize("t_max")?;
            ScheduleKind::CosineAnnealing {
                t_max: s.required("t_max", t)?,
            }
        }
        step => {
            let milestones = s.usizes("milestones")?.unwrap_or_else(|| vec![30, 60, 80]);
            let factor = s.f64("factor")?.unwrap_or(0.2);
            if step == "step" {
                ScheduleKind::StepDecay { milestones, factor }
            } else {
                let we = s.usize("warmup_epochs")?;
                ScheduleKind::LinearWarmupThenStep {
                    warmup_epochs: s.required("warmup_epochs", we)?,
                    warmup_start: s.f64("warmup_start")?.unwrap_or(0.0),
                    milestones,
                    factor,
                }
            }
        }
    };
    s.finish()?;
    Ok(OptimConfig {
        momentum,
        weight_decay,
        schedule: LrSchedule {
            initial_lr: lr,
            kind,
        },
    })
}

fn parse_strategy(mut s: Section) -> Result<AugmentStrategy> {
    let kind = s.choice(
        "kind",
        &["none", "mixup", "manifold_mixup", "am_mixup"],
        "none",
    )?;
    let strategy = match kind {
        "none" => AugmentStrategy::None,
        "mixup" => AugmentStrategy::Mixup {
            alpha: s.f64("alpha")?.unwrap_or(1.0),
        },
        "manifold_mixup" => AugmentStrategy::ManifoldMixup {
            alpha: s.f64("alpha")?.unwrap_or(1.0),
            eligible_layers: s.usizes("eligible_layers")?,
        },
        _ => {
            let d = AmConfig::default();
            let beta = s.f64("beta")?.unwrap_or(d.beta);
            let rate_mode = match s.choice("rate_mode", &["scheduled", "fixed_beta", "fixed"], "scheduled")? {
                "scheduled" => RateMode::Scheduled,
                "fixed_beta" => RateMode::FixedBeta {
                    alpha: s.f64("alpha")?.unwrap_or(1.0),
                },
                _ => {
                    let r = s.f64("rate")?;
                    RateMode::Fixed(s.required("rate", r)?)
                }
            };
            AugmentStrategy::AmMixup(AmConfig {
                beta,
                rate_mode,
                one_sided: s.bool("one_sided")?.unwrap_or(d.one_sided),
                last_layer_only: s.bool("last_layer_only")?.unwrap_or(d.last_layer_only),
            })
        }
    };
    if let Some(k) = s.table.keys().next() {
        return Err(Error::config(
            s.path(k),
            format!("unknown key (or not used by strategy `{kind}`)"),
        ));
    }
    Ok(strategy)
}
