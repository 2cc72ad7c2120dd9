//! Run log: a header carrying the config fingerprint and seed, then one
//! tab-separated record per generation:
//!
//! ```text
//! gen  improved  best_objective  model=g1,g2  valid=c  sample=g1,...,gp  par=c1,...,cp
//! ```

use std::fmt::Write as _;

use galgo_core::engine::RunResult;
use galgo_core::genome::{GeneticTopology, Genotype};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

const MAGIC: &str = "#galgo-run-log";

/// Hex SHA-256 of the given canonical config text.
pub fn fingerprint(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn join(topology: &GeneticTopology, separator: &str, gs: &[Genotype]) -> String {
    gs.iter()
        .map(|g| topology.render(g, separator))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn render_run_log(
    topology: &GeneticTopology,
    separator: &str,
    fingerprint: &str,
    result: &RunResult,
) -> String {
    let mut out = format!("{MAGIC}\tconfig={fingerprint}\tseed={}\n", result.seed);
    for rec in &result.records {
        let best = rec.best_objective.map_or_else(|| "NA".to_string(), |v| v.to_string());
        let par = rec
            .participation
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(
            out,
            "{}\t{}\t{}\tmodel={}\tvalid={}\tsample={}\tpar={}",
            rec.generation,
            u8::from(rec.improved),
            best,
            join(topology, separator, &rec.best_model),
            rec.valid_count,
            join(topology, separator, &rec.sample),
            par,
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub generation: usize,
    pub improved: bool,
    pub best_objective: Option<f64>,
    pub model: Vec<Genotype>,
    pub valid: usize,
    pub sample: Vec<Genotype>,
    pub participation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub fingerprint: String,
    pub seed: u64,
    pub records: Vec<LogRecord>,
}

fn field<'a>(value: &'a str, key: &str, line: usize) -> CliResult<&'a str> {
    value
        .strip_prefix(key)
        .and_then(|v| v.strip_prefix('='))
        .ok_or_else(|| CliError::Data(format!("line {line}: expected {key}=")))
}

fn genotypes(
    text: &str,
    topology: &GeneticTopology,
    separator: &str,
    line: usize,
) -> CliResult<Vec<Genotype>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|g| {
            topology
                .parse(g, separator)
                .map_err(|e| CliError::Data(format!("line {line}: {e}")))
        })
        .collect()
}

pub fn parse_run_log(text: &str, topology: &GeneticTopology, separator: &str) -> CliResult<RunLog> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::Data("empty run log".into()))?;
    let mut parts = header.split('\t');
    if parts.next() != Some(MAGIC) {
        return Err(CliError::Data("not a run log".into()));
    }
    let fingerprint = field(parts.next().unwrap_or(""), "config", 1)?.to_string();
    let seed = field(parts.next().unwrap_or(""), "seed", 1)?
        .parse()
        .map_err(|_| CliError::Data("line 1: bad seed".into()))?;

    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let no = i + 2;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 {
            return Err(CliError::Data(format!("line {no}: expected 7 columns")));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| CliError::Data(format!("line {no}: bad integer {s:?}")))
        };
        let best_objective = match cols[2] {
            "NA" => None,
            v => Some(
                v.parse::<f64>()
                    .map_err(|_| CliError::Data(format!("line {no}: bad objective {v:?}")))?,
            ),
        };
        let par = field(cols[6], "par", no)?;
        let participation = if par.is_empty() {
            Vec::new()
        } else {
            par.split(',').map(int).collect::<CliResult<_>>()?
        };
        records.push(LogRecord {
            generation: int(cols[0])?,
            improved: match cols[1] {
                "1" => true,
                "0" => false,
                v => return Err(CliError::Data(format!("line {no}: bad flag {v:?}"))),
            },
            best_objective,
            model: genotypes(field(cols[3], "model", no)?, topology, separator, no)?,
            valid: int(field(cols[4], "valid", no)?)?,
            sample: genotypes(field(cols[5], "sample", no)?, topology, separator, no)?,
            participation,
        });
    }
    Ok(RunLog {
        fingerprint,
        seed,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use galgo_core::engine::GenerationRecord;

    #[test]
    fn fingerprint_is_sha256() {
        assert_eq!(
            fingerprint("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn round_trip() {
        let topo = GeneticTopology::binary(3).unwrap();
        let g = |i| topo.genotype_at(i).unwrap();
        let result = RunResult {
            seed: 12,
            best: None,
            target_reached: false,
            records: vec![
                GenerationRecord {
                    generation: 1,
                    best_objective: Some(0.1 + 0.2),
                    global_best: Some(0.1 + 0.2),
                    improved: true,
                    best_model: vec![g(1), g(4)],
                    valid_count: 2,
                    sample: vec![g(1), g(4), g(6)],
                    participation: vec![2, 1, 1],
                    replaced: 2,
                },
                GenerationRecord {
                    generation: 2,
                    best_objective: None,
                    global_best: Some(0.3),
                    improved: false,
                    best_model: vec![],
                    valid_count: 0,
                    sample: vec![g(1), g(2), g(6)],
                    participation: vec![0, 0, 0],
                    replaced: 0,
                },
            ],
        };
        let text = render_run_log(&topo, "", "ff00", &result);
        assert!(text.lines().nth(1).unwrap().starts_with("1\t1\t0.30000000000000004\tmodel=001,100\t"));
        let log = parse_run_log(&text, &topo, "").unwrap();
        assert_eq!(log.seed, 12);
        assert_eq!(log.fingerprint, "ff00");
        assert_eq!(log.records.len(), 2);
        assert_eq!(log.records[0].best_objective, Some(0.1 + 0.2));
        assert_eq!(log.records[0].sample, result.records[0].sample);
        assert_eq!(log.records[0].participation, vec![2, 1, 1]);
        assert!(log.records[1].model.is_empty());
        assert!(parse_run_log("gen\n", &topo, "").is_err());
    }
}
