use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use molgraph::{BondOrder, LabeledGraph};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{ContextSequence, Pattern};

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
struct PatternRecord {
    pattern_id: String,
    nodes: Vec<u8>,
    edges: Vec<(usize, usize, BondOrder)>,
    support: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MiningError + '_ {
    move |source| MiningError::Io { path: path.to_path_buf(), source }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), MiningError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for item in items {
        let line = serde_json::to_string(&item).expect("records serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, MiningError> {
    let r = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| MiningError::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            msg: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_patterns(path: impl AsRef<Path>, patterns: &[Pattern]) -> Result<(), MiningError> {
    write_jsonl(
        path.as_ref(),
        patterns.iter().map(|p| PatternRecord {
            pattern_id: p.id.clone(),
            nodes: p.graph.nodes().to_vec(),
            edges: p.graph.edges().to_vec(),
            support: p.support.clone(),
        }),
    )
}

pub fn read_patterns(path: impl AsRef<Path>) -> Result<Vec<Pattern>, MiningError> {
    let path = path.as_ref();
    let records: Vec<PatternRecord> = read_jsonl(path)?;
    records
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let n = r.nodes.len();
            if let Some(&(i, j, _)) = r.edges.iter().find(|&&(i, j, _)| i >= n || j >= n || i == j) {
                return Err(MiningError::Parse {
                    path: path.to_path_buf(),
                    line: k + 1,
                    msg: format!("bad edge ({i}, {j}) for {n} nodes"),
                });
            }
            Ok(Pattern {
                graph: LabeledGraph::new(r.pattern_id.clone(), r.nodes, r.edges),
                id: r.pattern_id,
                support: r.support,
            })
        })
        .collect()
}

pub fn write_contexts(path: impl AsRef<Path>, contexts: &[ContextSequence]) -> Result<(), MiningError> {
    write_jsonl(path.as_ref(), contexts)
}

pub fn read_contexts(path: impl AsRef<Path>) -> Result<Vec<ContextSequence>, MiningError> {
    read_jsonl(path.as_ref())
}
