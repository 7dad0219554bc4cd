//! Parameter sweeps: a JSON grid specification, a parallel runner that
//! emits one [`ExperimentRecord`] per `(cell, seed)`, and seed aggregation.

mod analysis;
mod record;

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use analysis::{
    aggregate, correlation_report, fit_quadratic, write_aggregate, AggregateRow,
    CorrelationReport, QuadraticFit, XField,
};
pub use record::{
    append_record, read_records, read_records_file, write_records, write_records_file,
    ExperimentRecord, RecordKey, CSV_HEADER, STATUS_OK,
};

use crate::connectome::{import_connectome, ConnectomeSource};
use crate::data::{load_cifar10, synthetic_blobs, Dataset, Normalization};
use crate::error::{Error, Result};
use crate::generate::{generate, BaseFamily, Family, GeneratorSpec};
use crate::graph::{Graph, GraphMetrics};
use crate::mlp::{MlpModel, ModelConfig, Scalar};
use crate::rng::{derive_seed, stream};
use crate::train::{train, Precision, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepFamily {
    Complete,
    Er,
    #[serde(alias = "static_sf")]
    Sf,
    /// A fixed graph read from `graph_file`; only model and shuffle seeds vary.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisParam {
    P,
    Mu,
    Gamma,
    M,
}

impl AxisParam {
    pub fn name(self) -> &'static str {
        match self {
            AxisParam::P => "p",
            AxisParam::Mu => "mu",
            AxisParam::Gamma => "gamma",
            AxisParam::M => "m",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: AxisParam,
    pub values: Vec<f64>,
}

/// Generator parameters held constant across the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedParams {
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub m: Option<f64>,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub width: usize,
    pub rounds: usize,
    pub bias: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            width: ModelConfig::DEFAULT_WIDTH,
            rounds: ModelConfig::DEFAULT_ROUNDS,
            bias: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobSpec {
    pub n_per_class: usize,
    pub test_per_class: usize,
    pub classes: usize,
    pub dim: usize,
    pub spread: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec {
            n_per_class: 500,
            test_per_class: 100,
            classes: 10,
            dim: 48,
            // Bayes error about 0.01%; at spread 1.0 it is about 9.7%.
            spread: 0.5,
            seed: 0,
        }
    }
}

impl BlobSpec {
    /// Train and test sets; the test set uses a derived seed.
    pub fn load(&self) -> Result<(Dataset, Dataset)> {
        let train = synthetic_blobs(self.n_per_class, self.classes, self.dim, self.spread, self.seed)?;
        let test = synthetic_blobs(
            self.test_per_class,
            self.classes,
            self.dim,
            self.spread,
            derive_seed(self.seed, stream::TEST_SPLIT),
        )?;
        Ok((train, test))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Cifar10 {
        dir: PathBuf,
        #[serde(default)]
        normalization: Normalization,
    },
    Blobs(BlobSpec),
}

impl DataSpec {
    pub fn load(&self) -> Result<(Dataset, Dataset)> {
        match self {
            DataSpec::Cifar10 { dir, normalization } => load_cifar10(dir, *normalization),
            DataSpec::Blobs(spec) => spec.load(),
        }
    }
}

fn default_communities() -> Vec<usize> {
    vec![1]
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub family: SweepFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_file: Option<PathBuf>,
    #[serde(default)]
    pub fixed: FixedParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis1: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis2: Option<Axis>,
    #[serde(default = "default_communities")]
    pub communities: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
    pub data: DataSpec,
}

/// One `(cell, seed)` unit of work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepJob {
    pub communities: usize,
    pub params: FixedParams,
    pub seed: u64,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a spec file. Relative `graph_file` and CIFAR `dir` paths are
    /// resolved against the spec file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut spec = Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::InvalidSpec(format!("{}: {j}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(file) = &mut spec.graph_file {
            *file = base.join(&*file);
        }
        if let DataSpec::Cifar10 { dir, .. } = &mut spec.data {
            *dir = base.join(&*dir);
        }
        Ok(spec)
    }

    fn axes(&self) -> impl Iterator<Item = &Axis> {
        self.axis1.iter().chain(self.axis2.iter())
    }

    /// Structural checks. Parameter values are checked per cell, so an
    /// infeasible cell becomes an error row instead of aborting the sweep.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        if self.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        if self.communities.is_empty() {
            return fail("communities must not be empty".into());
        }
        if self.axis2.is_some() && self.axis1.is_none() {
            return fail("axis2 given without axis1".into());
        }
        let mut swept = HashSet::new();
        for axis in self.axes() {
            if axis.values.is_empty() {
                return fail(format!("axis {} has no values", axis.name.name()));
            }
            if !swept.insert(axis.name) {
                return fail(format!("axis {} appears twice", axis.name.name()));
            }
        }
        let fixed = [
            (AxisParam::P, self.fixed.p.is_some()),
            (AxisParam::Gamma, self.fixed.gamma.is_some()),
            (AxisParam::M, self.fixed.m.is_some()),
            (AxisParam::Mu, self.fixed.mu.is_some()),
        ];
        let needed: &[AxisParam] = match self.family {
            SweepFamily::Complete | SweepFamily::File => &[],
            SweepFamily::Er => &[AxisParam::P, AxisParam::Mu],
            SweepFamily::Sf => &[AxisParam::Gamma, AxisParam::M, AxisParam::Mu],
        };
        for (param, is_fixed) in fixed {
            let given = is_fixed || swept.contains(&param);
            if is_fixed && swept.contains(&param) {
                return fail(format!("{} is both fixed and swept", param.name()));
            }
            match (given, needed.contains(&param)) {
                (true, false) => {
                    return fail(format!("{} is not used by this family", param.name()))
                }
                (false, true) => return fail(format!("{} is required", param.name())),
                _ => {}
            }
        }
        match self.family {
            SweepFamily::File => {
                if self.graph_file.is_none() {
                    return fail("family file needs graph_file".into());
                }
                if self.n.is_some() {
                    return fail("n is taken from graph_file".into());
                }
            }
            _ => {
                if self.graph_file.is_some() {
                    return fail("graph_file is only used by family file".into());
                }
                if self.n.is_none() {
                    return fail("n is required".into());
                }
            }
        }
        if matches!(self.family, SweepFamily::Complete | SweepFamily::File)
            && self.communities != [1]
        {
            return fail("community composition needs family er or sf".into());
        }
        self.train.validate()?;
        if self.model.width == 0 || self.model.rounds == 0 {
            return fail("model width and rounds must be positive".into());
        }
        Ok(())
    }

    /// Jobs in canonical order: communities, axis1, axis2, then seeds.
    pub fn jobs(&self) -> Vec<SweepJob> {
        let values = |axis: &Option<Axis>| -> Vec<Option<(AxisParam, f64)>> {
            match axis {
                Some(a) => a.values.iter().map(|&v| Some((a.name, v))).collect(),
                None => vec![None],
            }
        };
        let mut jobs = Vec::new();
        for &k in &self.communities {
            for a1 in values(&self.axis1) {
                for a2 in values(&self.axis2) {
                    let mut params = self.fixed;
                    for (name, v) in a1.into_iter().chain(a2) {
                        let slot = match name {
                            AxisParam::P => &mut params.p,
                            AxisParam::Mu => &mut params.mu,
                            AxisParam::Gamma => &mut params.gamma,
                            AxisParam::M => &mut params.m,
                        };
                        *slot = Some(v);
                    }
                    for &seed in &self.seeds {
                        jobs.push(SweepJob {
                            communities: k,
                            params,
                            seed,
                        });
                    }
                }
            }
        }
        jobs
    }

    fn family_label(&self) -> String {
        match self.family {
            SweepFamily::Complete => "complete".into(),
            SweepFamily::Er => "er".into(),
            SweepFamily::Sf => "sf".into(),
            SweepFamily::File => {
                let stem = self
                    .graph_file
                    .as_deref()
                    .and_then(Path::file_stem)
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                format!("file:{stem}")
            }
        }
    }

    /// Record with the configuration columns filled and no results yet.
    pub fn skeleton(&self, job: &SweepJob) -> ExperimentRecord {
        ExperimentRecord {
            family: self.family_label(),
            communities: job.communities,
            p: job.params.p,
            gamma: job.params.gamma,
            m: job.params.m,
            mu: job.params.mu,
            width: self.model.width,
            rounds: self.model.rounds,
            seed: job.seed,
            status: String::new(),
            nodes_realized: None,
            bridges: None,
            mean_degree: None,
            clustering: None,
            avg_path_len: None,
            modularity: None,
            cross_density: None,
            top1_error: None,
            wall_ms: None,
        }
    }

    /// Generator specification for a job. Every er/sf cell goes through the
    /// community composer, so a single community is also reduced to its
    /// largest component.
    pub fn generator_spec(&self, job: &SweepJob) -> Option<GeneratorSpec> {
        let n = self.n?;
        let base = match self.family {
            SweepFamily::Complete => return Some(GeneratorSpec::complete(n)),
            SweepFamily::File => return None,
            SweepFamily::Er => BaseFamily::Er,
            SweepFamily::Sf => BaseFamily::StaticSf,
        };
        Some(GeneratorSpec {
            family: Family::CommunityComposed,
            n,
            p: job.params.p,
            gamma: job.params.gamma,
            m: job.params.m,
            communities: Some(job.communities),
            mu: job.params.mu,
            base: Some(base),
            seed: job.seed,
        })
    }
}

#[derive(Default)]
pub struct RunOptions<'a> {
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
    /// Records from an earlier run; their cells are not recomputed.
    pub existing: Vec<ExperimentRecord>,
    /// Called once per newly computed record, in completion order.
    pub on_record: Option<&'a (dyn Fn(&ExperimentRecord) + Sync)>,
}

/// Runs every job not already in `options.existing`.
///
/// The returned records follow the canonical job order whatever the worker
/// count or completion order; existing rows outside the grid are kept at the
/// end. Per-job failures are reported in the `status` column.
pub fn run_sweep(spec: &SweepSpec, options: RunOptions<'_>) -> Result<Vec<ExperimentRecord>> {
    spec.validate()?;
    let jobs = spec.jobs();
    let mut existing: HashMap<RecordKey, ExperimentRecord> = HashMap::new();
    let mut foreign_order = Vec::new();
    for r in options.existing {
        let key = r.key();
        if !existing.contains_key(&key) {
            foreign_order.push(key.clone());
        }
        existing.insert(key, r);
    }
    let pending: Vec<(usize, SweepJob)> = jobs
        .iter()
        .enumerate()
        .filter(|(_, job)| !existing.contains_key(&spec.skeleton(job).key()))
        .map(|(i, job)| (i, *job))
        .collect();
    log::info!(
        "sweep {:?}: {} jobs, {} already done",
        spec.name,
        jobs.len(),
        jobs.len() - pending.len()
    );

    let mut fresh: HashMap<usize, ExperimentRecord> = HashMap::new();
    if !pending.is_empty() {
        let context = prepare(spec)?;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = options.workers {
            builder = builder.num_threads(w.max(1));
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let on_record = options.on_record;
        let done: Vec<(usize, ExperimentRecord)> = pool.install(|| {
            pending
                .par_iter()
                .map(|(i, job)| {
                    let record = run_job(spec, &context, job);
                    if let Some(cb) = on_record {
                        cb(&record);
                    }
                    (*i, record)
                })
                .collect()
        });
        fresh.extend(done);
    }

    let mut out = Vec::with_capacity(jobs.len());
    let mut in_grid = HashSet::new();
    for (i, job) in jobs.iter().enumerate() {
        let key = spec.skeleton(job).key();
        let record = match fresh.remove(&i) {
            Some(r) => r,
            None => existing[&key].clone(),
        };
        in_grid.insert(key);
        out.push(record);
    }
    for key in foreign_order {
        if !in_grid.contains(&key) {
            out.push(existing[&key].clone());
        }
    }
    Ok(out)
}

/// Shared read-only inputs loaded once per sweep.
struct SweepContext {
    train_set: Dataset,
    test_set: Dataset,
    file_graph: Option<Graph>,
}

fn prepare(spec: &SweepSpec) -> Result<SweepContext> {
    let (train_set, test_set) = spec.data.load()?;
    let file_graph = match &spec.graph_file {
        Some(path) => {
            let imported = import_connectome(&ConnectomeSource::new(path))?;
            for w in &imported.warnings {
                log::warn!("{w}");
            }
            Some(imported.graph)
        }
        None => None,
    };
    Ok(SweepContext {
        train_set,
        test_set,
        file_graph,
    })
}

fn run_job(spec: &SweepSpec, ctx: &SweepContext, job: &SweepJob) -> ExperimentRecord {
    let started = Instant::now();
    let mut record = spec.skeleton(job);
    let outcome = (|| -> Result<f64> {
        let (graph, bridges) = match (&ctx.file_graph, spec.generator_spec(job)) {
            (Some(g), _) => (g.clone(), 0),
            (None, Some(gen_spec)) => {
                let generated = generate(&gen_spec)?;
                (generated.graph, generated.bridges)
            }
            (None, None) => return Err(Error::InvalidSpec("no graph source".into())),
        };
        let metrics = GraphMetrics::compute(&graph);
        record.nodes_realized = Some(graph.node_count());
        record.bridges = Some(bridges);
        record.mean_degree = Some(metrics.mean_degree);
        record.clustering = Some(metrics.clustering);
        record.avg_path_len = metrics.avg_path_length;
        record.modularity = metrics.modularity;
        record.cross_density = metrics.cross_density;
        train_on_graph(spec, ctx, &graph, job.seed)
    })();
    match outcome {
        Ok(top1) => {
            record.status = STATUS_OK.into();
            record.top1_error = Some(top1);
        }
        Err(e) => {
            log::warn!("job {:?} failed: {e}", job);
            record.status = format!("error: {e}");
        }
    }
    record.wall_ms = Some(started.elapsed().as_millis() as u64);
    record
}

fn train_on_graph(spec: &SweepSpec, ctx: &SweepContext, graph: &Graph, seed: u64) -> Result<f64> {
    let mut config = ModelConfig::new(
        spec.model.width,
        spec.model.rounds,
        ctx.train_set.dim(),
        ctx.train_set.classes(),
        seed,
    );
    config.bias = spec.model.bias;
    let train_cfg = TrainConfig { seed, ..spec.train };
    fn fit<F: Scalar>(
        graph: &Graph,
        config: ModelConfig,
        ctx: &SweepContext,
        train_cfg: &TrainConfig,
    ) -> Result<f64> {
        let mut model = MlpModel::<F>::for_graph(graph, config)?;
        let report = train(&mut model, &ctx.train_set, &ctx.test_set, train_cfg)?;
        Ok(report.final_eval.top1_error_percent)
    }
    match spec.train.precision {
        Precision::Single => fit::<f32>(graph, config, ctx, &train_cfg),
        Precision::Double => fit::<f64>(graph, config, ctx, &train_cfg),
    }
}
