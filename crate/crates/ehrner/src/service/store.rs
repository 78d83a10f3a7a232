//! Append-only JSON-lines journal with periodic snapshots.
//!
//! `snapshot.json` holds the full state as of some point; `journal.jsonl`
//! holds every event after it. Opening replays the journal over the
//! snapshot. A torn final journal line (crash mid-append) is ignored.

use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AnnotationRecord, Project, State, TrainJob};
use crate::error::{Error, Result};

/// Events between snapshots.
const SNAPSHOT_EVERY: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub(crate) enum Event {
    Project(Project),
    Record(AnnotationRecord),
    Job(TrainJob),
    ModelInstalled {
        project: String,
        version: u64,
        file: Option<PathBuf>,
    },
}

pub(crate) struct Journal {
    dir: PathBuf,
    file: File,
    since_snapshot: usize,
}

impl Journal {
    pub fn open(dir: &Path) -> Result<(Journal, State)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let snapshot = dir.join("snapshot.json");
        let mut state: State = if snapshot.exists() {
            let text = fs::read_to_string(&snapshot).map_err(|e| Error::io(&snapshot, e))?;
            let mut state: State = serde_json::from_str(&text)?;
            state.reindex();
            state
        } else {
            State::default()
        };
        let journal = dir.join("journal.jsonl");
        let mut since_snapshot = 0;
        if journal.exists() {
            let text = fs::read_to_string(&journal).map_err(|e| Error::io(&journal, e))?;
            let lines: Vec<&str> = text.lines().collect();
            for (i, line) in lines.iter().enumerate() {
                match serde_json::from_str::<Event>(line) {
                    Ok(event) => {
                        state.apply(&event);
                        since_snapshot += 1;
                    }
                    Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => break,
                    Err(e) => {
                        return Err(Error::Parse {
                            path: journal.clone(),
                            line: i + 1,
                            message: e.to_string(),
                        })
                    }
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&journal)
            .map_err(|e| Error::io(&journal, e))?;
        let mut j = Journal {
            dir: dir.to_path_buf(),
            file,
            since_snapshot,
        };
        // Start from a clean snapshot so a torn tail is not appended to.
        j.snapshot(&state)?;
        Ok((j, state))
    }

    /// Append `event`, which has already been applied to `state`.
    pub fn append(&mut self, event: &Event, state: &State) -> Result<()> {
        let path = self.dir.join("journal.jsonl");
        let mut line = serde_json::to_string(event)?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&path, e))?;
        self.since_snapshot += 1;
        if self.since_snapshot >= SNAPSHOT_EVERY {
            self.snapshot(state)?;
        }
        Ok(())
    }

    /// Write the full state atomically, then truncate the journal.
    pub fn snapshot(&mut self, state: &State) -> Result<()> {
        let tmp = self.dir.join("snapshot.json.tmp");
        let dst = self.dir.join("snapshot.json");
        fs::write(&tmp, serde_json::to_vec(state)?).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &dst).map_err(|e| Error::io(&dst, e))?;
        let journal = self.dir.join("journal.jsonl");
        self.file = File::create(&journal).map_err(|e| Error::io(&journal, e))?;
        self.file = OpenOptions::new()
            .append(true)
            .open(&journal)
            .map_err(|e| Error::io(&journal, e))?;
        self.since_snapshot = 0;
        Ok(())
    }
}
