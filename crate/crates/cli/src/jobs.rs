//! Asynchronous jobs on a bounded worker pool. A job's parameters are fixed
//! at submission, together with the library versions it runs on, and saved
//! next to its outputs; rerunning that snapshot reproduces the outputs.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use schemakit::ontology::Ontology;
use schemakit::schema::Schema;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Semaphore;

use crate::config::Settings;
use crate::ops::{self, Outputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Mine,
    Build,
    Coverage,
    Rank,
    Intrusion,
    Infer,
}

impl JobKind {
    pub const ALL: [JobKind; 6] = [
        JobKind::Mine,
        JobKind::Build,
        JobKind::Coverage,
        JobKind::Rank,
        JobKind::Intrusion,
        JobKind::Infer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JobKind::Mine => "mine",
            JobKind::Build => "build",
            JobKind::Coverage => "coverage",
            JobKind::Rank => "rank",
            JobKind::Intrusion => "intrusion",
            JobKind::Infer => "infer",
        }
    }

    pub fn parse(name: &str) -> Option<JobKind> {
        JobKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Whether the job reads the schema library.
    fn uses_library(self) -> bool {
        matches!(
            self,
            JobKind::Coverage | JobKind::Rank | JobKind::Intrusion | JobKind::Infer
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    /// pending -> running -> done | failed, nothing else.
    pub fn can_become(self, next: JobStatus) -> bool {
        matches!(
            (self, next),
            (JobStatus::Pending, JobStatus::Running)
                | (JobStatus::Running, JobStatus::Done)
                | (JobStatus::Running, JobStatus::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    /// Parameters after defaults were applied, and the library versions.
    pub config: Value,
    /// Output files, in write order, once done.
    pub outputs: Vec<PathBuf>,
    pub summary: Option<String>,
    pub error: Option<String>,
}

/// Typed parameters of one job.
#[derive(Debug, Clone)]
pub enum JobSpec {
    Mine(ops::MineParams),
    Build(ops::BuildParams),
    Coverage(ops::CoverageParams),
    Rank(ops::RankParams),
    Intrusion(ops::IntrusionParams),
    Infer(ops::InferParams),
}

/// Overlays `patch` onto `base`, recursing into objects.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

impl JobSpec {
    /// Request parameters over the defaults from `settings`.
    pub fn resolve(
        kind: JobKind,
        request: Value,
        settings: &Settings,
    ) -> Result<(JobSpec, Value), String> {
        if !request.is_object() && !request.is_null() {
            return Err("job parameters must be a JSON object".into());
        }
        let mut params = ops::default_params(kind.name(), settings);
        if !request.is_null() {
            merge(&mut params, request);
        }
        fn typed<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T, String> {
            serde_json::from_value(v.clone()).map_err(|e| e.to_string())
        }
        let spec = match kind {
            JobKind::Mine => {
                let p: ops::MineParams = typed(&params)?;
                p.check().map_err(|e| e.to_string())?;
                JobSpec::Mine(p)
            }
            JobKind::Build => JobSpec::Build(typed(&params)?),
            JobKind::Coverage => JobSpec::Coverage(typed(&params)?),
            JobKind::Rank => JobSpec::Rank(typed(&params)?),
            JobKind::Intrusion => JobSpec::Intrusion(typed(&params)?),
            JobKind::Infer => JobSpec::Infer(typed(&params)?),
        };
        Ok((spec, params))
    }

    pub fn run(&self, ontology: &Ontology, library: &[Schema]) -> anyhow::Result<Outputs> {
        match self {
            JobSpec::Mine(p) => ops::mine(p),
            JobSpec::Build(p) => ops::build(p, ontology),
            JobSpec::Coverage(p) => ops::coverage_report(p, library, "library"),
            JobSpec::Rank(p) => ops::rank(p, library),
            JobSpec::Intrusion(p) => ops::intrusion_generate(p, library),
            JobSpec::Infer(p) => ops::infer(p, library),
        }
    }
}

pub struct JobManager {
    data_dir: PathBuf,
    records: Mutex<BTreeMap<String, JobRecord>>,
    pool: Arc<Semaphore>,
}

impl JobManager {
    pub fn new(data_dir: impl Into<PathBuf>, workers: usize) -> Self {
        JobManager {
            data_dir: data_dir.into(),
            records: Mutex::new(BTreeMap::new()),
            pool: Arc::new(Semaphore::new(workers.max(1))),
        }
    }

    pub fn job_dir(&self, id: &str) -> PathBuf {
        self.data_dir.join("jobs").join(id)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, BTreeMap<String, JobRecord>> {
        self.records.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn get(&self, id: &str) -> Option<JobRecord> {
        self.lock().get(id).cloned()
    }

    pub fn list(&self) -> Vec<JobRecord> {
        self.lock().values().cloned().collect()
    }

    fn update(&self, id: &str, next: JobStatus, apply: impl FnOnce(&mut JobRecord)) {
        let mut records = self.lock();
        let record = records.get_mut(id).expect("jobs are never removed");
        assert!(
            record.status.can_become(next),
            "{:?} -> {next:?}",
            record.status
        );
        record.status = next;
        apply(record);
    }

    /// Registers a job and schedules it. Must be called inside a tokio
    /// runtime. `library` is the snapshot the job runs on, with versions.
    pub fn submit(
        self: &Arc<Self>,
        kind: JobKind,
        spec: JobSpec,
        params: Value,
        ontology: Arc<Ontology>,
        library: Vec<(Schema, u64)>,
    ) -> JobRecord {
        let versions: BTreeMap<&str, u64> = if kind.uses_library() {
            library.iter().map(|(s, v)| (s.id.as_str(), *v)).collect()
        } else {
            BTreeMap::new()
        };
        let config = serde_json::json!({ "params": params, "library": versions });
        let record = {
            let mut records = self.lock();
            let id = format!("job-{:06}", records.len() + 1);
            let record = JobRecord {
                id: id.clone(),
                kind,
                status: JobStatus::Pending,
                config,
                outputs: Vec::new(),
                summary: None,
                error: None,
            };
            records.insert(id, record.clone());
            record
        };
        let schemas: Vec<Schema> = if kind.uses_library() {
            library.into_iter().map(|(s, _)| s).collect()
        } else {
            Vec::new()
        };
        let this = Arc::clone(self);
        let id = record.id.clone();
        let snapshot = record.config.clone();
        tokio::spawn(async move {
            let _permit = this
                .pool
                .clone()
                .acquire_owned()
                .await
                .expect("pool is never closed");
            this.update(&id, JobStatus::Running, |_| {});
            let dir = this.job_dir(&id);
            let worker =
                tokio::task::spawn_blocking(move || -> anyhow::Result<(Vec<PathBuf>, String)> {
                    std::fs::create_dir_all(&dir)?;
                    let mut snap = serde_json::to_vec_pretty(&snapshot)?;
                    snap.push(b'\n');
                    std::fs::write(dir.join("config.json"), snap)?;
                    let out = spec.run(&ontology, &schemas)?;
                    Ok((out.write_to(&dir)?, out.summary))
                });
            match worker.await {
                Ok(Ok((paths, summary))) => this.update(&id, JobStatus::Done, |r| {
                    r.outputs = paths;
                    r.summary = Some(summary);
                }),
                Ok(Err(e)) => {
                    this.update(&id, JobStatus::Failed, |r| r.error = Some(format!("{e:#}")))
                }
                Err(e) => this.update(&id, JobStatus::Failed, |r| {
                    r.error = Some(format!("job panicked: {e}"))
                }),
            }
        });
        record
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_moves_forward_only() {
        use JobStatus::*;
        let all = [Pending, Running, Done, Failed];
        let allowed: Vec<(JobStatus, JobStatus)> = all
            .iter()
            .flat_map(|&a| all.iter().map(move |&b| (a, b)))
            .filter(|(a, b)| a.can_become(*b))
            .collect();
        assert_eq!(
            allowed,
            [(Pending, Running), (Running, Done), (Running, Failed)]
        );
    }

    #[test]
    fn merge_overlays_nested_objects() {
        let mut base = serde_json::json!({"mining": {"min_support": 10, "max_items": 10}, "x": 1});
        merge(
            &mut base,
            serde_json::json!({"mining": {"min_support": 3}, "corpus": "c.jsonl"}),
        );
        assert_eq!(
            base,
            serde_json::json!({"mining": {"min_support": 3, "max_items": 10}, "x": 1, "corpus": "c.jsonl"})
        );
    }

    #[test]
    fn resolve_applies_settings_and_rejects_unknown_fields() {
        let settings = Settings::default();
        let (spec, params) = JobSpec::resolve(
            JobKind::Mine,
            serde_json::json!({"corpus": "c.jsonl"}),
            &settings,
        )
        .unwrap();
        assert!(matches!(spec, JobSpec::Mine(ref p) if p.mining == settings.mining));
        assert_eq!(params["mining"]["min_support"], 10);
        assert!(JobSpec::resolve(
            JobKind::Mine,
            serde_json::json!({"corpus": "c", "bogus": 1}),
            &settings
        )
        .is_err());
        assert!(JobSpec::resolve(JobKind::Mine, serde_json::json!({}), &settings).is_err());
        assert!(JobSpec::resolve(JobKind::Mine, serde_json::json!([1]), &settings).is_err());
        assert_eq!(JobKind::parse("intrusion"), Some(JobKind::Intrusion));
        assert_eq!(JobKind::parse("serve"), None);
    }
}
