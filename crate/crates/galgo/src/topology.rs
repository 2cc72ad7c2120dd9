//! The `.cgt` topology format: one `gene <name> : <allele> ...` line per
//! gene, `#` starts a comment.

use std::path::Path;

use galgo_core::genome::{Gene, GeneticTopology};

use crate::error::{read_to_string, CliError, CliResult};

const RESERVED: [char; 3] = [',', ':', '#'];

pub fn parse_cgt(text: &str) -> CliResult<GeneticTopology> {
    let mut genes = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| CliError::Data(format!("line {}: {msg}", lineno + 1));
        let rest = line
            .strip_prefix("gene")
            .filter(|r| r.starts_with(char::is_whitespace))
            .ok_or_else(|| err("expected `gene <name> : <alleles>`"))?;
        let (name, alleles) = rest.split_once(':').ok_or_else(|| err("missing `:`"))?;
        let name = name.trim();
        let alleles: Vec<&str> = alleles.split_whitespace().collect();
        if name.contains(RESERVED) || alleles.iter().any(|a| a.contains(RESERVED)) {
            return Err(err("names may not contain `,`, `:` or `#`"));
        }
        genes.push(Gene::new(name, alleles));
    }
    Ok(GeneticTopology::new(genes)?)
}

pub fn write_cgt(topology: &GeneticTopology) -> String {
    let mut out = String::new();
    for gene in topology.genes() {
        out.push_str("gene ");
        out.push_str(&gene.name);
        out.push_str(" :");
        for a in &gene.alleles {
            out.push(' ');
            out.push_str(a);
        }
        out.push('\n');
    }
    out
}

pub fn load_cgt(path: &Path) -> CliResult<GeneticTopology> {
    parse_cgt(&read_to_string(path)?).map_err(|e| e.in_file(path))
}
