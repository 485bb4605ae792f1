//! Asynchronous jobs wrapping long operations, with idempotency keys and a
//! per-code-set run queue.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ErrorBody, ServiceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    TerminologyImport,
    CodeSet,
    RelationshipRun,
    MatchBatch,
    CustomTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Completed,
    KilledBudget,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Completed | JobStatus::KilledBudget | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub progress: Progress,
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default)]
    pub result: Option<Value>,
    #[serde(default)]
    pub error: Option<ErrorBody>,
}

#[derive(Default)]
struct Inner {
    next: u64,
    jobs: BTreeMap<String, Job>,
    keys: HashMap<String, String>,
    by_run: HashMap<String, String>,
}

#[derive(Default)]
pub struct JobRegistry {
    inner: Mutex<Inner>,
    run_queues: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl JobRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates a job unless `key` already names one, in which case that job
    /// is returned with `false`. `prepare` runs under the registry lock so
    /// two requests with the same key cannot both create work; it returns
    /// the run id for run jobs.
    pub fn submit(
        &self,
        kind: JobKind,
        key: Option<&str>,
        prepare: impl FnOnce() -> Result<Option<String>, ServiceError>,
    ) -> Result<(Job, bool), ServiceError> {
        let mut inner = self.inner.lock();
        if let Some(id) = key.and_then(|k| inner.keys.get(k)) {
            return Ok((inner.jobs[id].clone(), false));
        }
        let run_id = prepare()?;
        inner.next += 1;
        let job = Job {
            id: format!("job-{}", inner.next),
            kind,
            status: JobStatus::Queued,
            progress: Progress::default(),
            run_id: run_id.clone(),
            result: None,
            error: None,
        };
        if let Some(k) = key {
            inner.keys.insert(k.to_string(), job.id.clone());
        }
        if let Some(r) = run_id {
            inner.by_run.insert(r, job.id.clone());
        }
        inner.jobs.insert(job.id.clone(), job.clone());
        Ok((job, true))
    }

    pub fn get(&self, id: &str) -> Result<Job, ServiceError> {
        self.inner
            .lock()
            .jobs
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::JobNotFound(id.to_string()))
    }

    pub fn for_run(&self, run_id: &str) -> Option<Job> {
        let inner = self.inner.lock();
        inner.by_run.get(run_id).and_then(|id| inner.jobs.get(id)).cloned()
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut Job)) {
        if let Some(job) = self.inner.lock().jobs.get_mut(id) {
            if !job.status.is_terminal() {
                f(job);
            }
        }
    }

    pub fn start(&self, id: &str) {
        self.update(id, |j| j.status = JobStatus::Running);
    }

    /// Progress only moves forward.
    pub fn progress(&self, id: &str, done: usize, total: usize) {
        self.update(id, |j| {
            if done >= j.progress.done {
                j.progress = Progress { done, total };
            }
        });
    }

    pub fn finish(&self, id: &str, status: JobStatus, result: Value) {
        self.update(id, |j| {
            j.status = status;
            j.progress.done = j.progress.total.max(j.progress.done);
            j.result = Some(result);
        });
    }

    pub fn fail(&self, id: &str, err: &ServiceError) {
        self.update(id, |j| {
            j.status = JobStatus::Failed;
            j.error = Some(err.body());
        });
    }

    /// Lock serializing runs over one code set.
    pub fn run_queue(&self, code_set_id: &str) -> Arc<Mutex<()>> {
        self.run_queues.lock().entry(code_set_id.to_string()).or_default().clone()
    }
}
