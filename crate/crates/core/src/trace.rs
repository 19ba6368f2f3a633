//! Line-delimited JSON traces of [`RunRecord`]s.
//!
//! A trace is one `{"type":"iteration",...}` object per evaluation followed
//! by one `{"type":"summary",...}` object carrying the status, seed, config
//! hash and the configuration itself.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::cuqb::CuqbConfig;
use crate::error::{Error, Result};
use crate::solvers::{IterationRecord, RunRecord, RunSummary};

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Iteration(IterationRecord),
    Summary {
        #[serde(flatten)]
        summary: RunSummary,
        config: CuqbConfig,
    },
}

pub fn write_jsonl<W: Write>(record: &RunRecord, mut out: W) -> Result<()> {
    for it in &record.iterations {
        serde_json::to_writer(&mut out, &Line::Iteration(it.clone()))?;
        out.write_all(b"\n")?;
    }
    let summary = Line::Summary { summary: record.summary.clone(), config: record.config.clone() };
    serde_json::to_writer(&mut out, &summary)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn to_jsonl(record: &RunRecord) -> String {
    let mut buf = Vec::new();
    write_jsonl(record, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<RunRecord> {
    let mut iterations = Vec::new();
    let mut tail = None;
    for (no, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if tail.is_some() {
            return Err(Error::InvalidArgument(format!("line {}: content after the summary", no + 1)));
        }
        match serde_json::from_str(&line)? {
            Line::Iteration(it) => iterations.push(it),
            Line::Summary { summary, config } => tail = Some((summary, config)),
        }
    }
    let (summary, config) = tail.ok_or_else(|| Error::InvalidArgument("trace has no summary line".into()))?;
    Ok(RunRecord { summary, config, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acqopt::MultiStartConfig;
    use crate::solvers::{run_solver, Solver};

    fn sample(solver: Solver) -> RunRecord {
        let cfg = CuqbConfig {
            multistart: MultiStartConfig { n_raw: 128, n_starts: 1, ..Default::default() },
            total_budget: 8,
            gp_restarts: 1,
            noise_std: 0.01,
            seed: 4,
            ..Default::default()
        };
        run_solver(solver, &crate::problems::get("bazaraa").unwrap(), &cfg).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        for solver in [Solver::Cuqb, Solver::Random] {
            let r = sample(solver);
            let text = to_jsonl(&r);
            assert_eq!(text.lines().count(), r.iterations.len() + 1);
            let back = read_jsonl(text.as_bytes()).unwrap();
            assert_eq!(back, r);
        }
    }

    #[test]
    fn summary_line_fields() {
        let text = to_jsonl(&sample(Solver::Cuqb));
        let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
        assert_eq!(last["type"], "summary");
        assert_eq!(last["status"]["kind"], "completed");
        assert_eq!(last["seed"], 4);
        assert_eq!(last["config_hash"].as_str().unwrap().len(), 16);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["type"], "iteration");
        assert_eq!(first["t"], 1);
    }

    #[test]
    fn malformed_traces_are_rejected() {
        let text = to_jsonl(&sample(Solver::Random));
        let no_summary: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(read_jsonl(no_summary.as_bytes()).is_err());
        let extra = format!("{text}{}\n", text.lines().next().unwrap());
        assert!(read_jsonl(extra.as_bytes()).is_err());
        assert!(read_jsonl("{\"type\":\"bogus\"}\n".as_bytes()).is_err());
    }
}
