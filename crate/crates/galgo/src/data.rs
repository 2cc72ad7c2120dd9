//! CSV formats: activity (`molecule,activity`), descriptor tables
//! (`genotype,<molecule ids...>`) and labeled contingency tables.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use galgo_core::descriptors::{Dataset, TableProvider};
use galgo_core::genome::{GeneticTopology, Genotype};
use galgo_core::stats::ContingencyTable;

use crate::error::{CliError, CliResult};

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(e.to_string())
}

fn number(field: &str, what: &str) -> CliResult<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::Data(format!("{what}: {field:?} is not a number")))
}

fn open(path: &Path) -> CliResult<std::fs::File> {
    std::fs::File::open(path).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> CliResult<std::fs::File> {
    std::fs::File::create(path).map_err(|e| CliError::io(path, e))
}

pub fn read_activity_from<R: Read>(reader: R) -> CliResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() != 2 {
        return Err(CliError::Data("activity file needs the columns molecule,activity".into()));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 2 {
            return Err(CliError::Data(format!("row {}: expected 2 fields", i + 2)));
        }
        ids.push(rec[0].to_string());
        values.push(number(&rec[1], &format!("row {}", i + 2))?);
    }
    Ok(Dataset::new(ids, values)?)
}

pub fn read_activity(path: &Path) -> CliResult<Dataset> {
    read_activity_from(open(path)?).map_err(|e| e.in_file(path))
}

pub fn write_activity_to<W: Write>(writer: W, dataset: &Dataset) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["molecule", "activity"]).map_err(csv_err)?;
    for (id, y) in dataset.molecule_ids().iter().zip(dataset.activity()) {
        w.write_record([id.as_str(), &y.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))
}

pub fn write_activity(path: &Path, dataset: &Dataset) -> CliResult<()> {
    write_activity_to(create(path)?, dataset)
}

/// Reads a descriptor table; columns are matched to the dataset's molecule
/// ids by name and may come in any order.
pub fn read_descriptors_from<R: Read>(
    reader: R,
    topology: &GeneticTopology,
    separator: &str,
    dataset: &Dataset,
) -> CliResult<TableProvider> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let column: HashMap<&str, usize> = header.iter().enumerate().skip(1).map(|(i, h)| (h, i)).collect();
    if column.len() != header.len().saturating_sub(1) {
        return Err(CliError::Data("descriptor header repeats a molecule id".into()));
    }
    let order: Vec<usize> = dataset
        .molecule_ids()
        .iter()
        .map(|id| {
            column
                .get(id.as_str())
                .copied()
                .ok_or_else(|| CliError::Data(format!("descriptor table lacks molecule {id}")))
        })
        .collect::<CliResult<_>>()?;
    if order.len() != column.len() {
        return Err(CliError::Data(
            "descriptor table has molecules missing from the activity file".into(),
        ));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != header.len() {
            return Err(CliError::Data(format!("row {}: expected {} fields", i + 2, header.len())));
        }
        let values = order
            .iter()
            .map(|&c| number(&rec[c], &format!("row {}", i + 2)))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push((rec[0].to_string(), values));
    }
    Ok(TableProvider::new(topology, separator, dataset.len(), rows)?)
}

pub fn read_descriptors(
    path: &Path,
    topology: &GeneticTopology,
    separator: &str,
    dataset: &Dataset,
) -> CliResult<TableProvider> {
    read_descriptors_from(open(path)?, topology, separator, dataset).map_err(|e| e.in_file(path))
}

pub fn write_descriptors_to<'a, W, I>(
    writer: W,
    topology: &GeneticTopology,
    separator: &str,
    molecule_ids: &[String],
    rows: I,
) -> CliResult<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a Genotype, &'a [f64])>,
{
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["genotype".to_string()];
    header.extend(molecule_ids.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (g, values) in rows {
        let mut rec = vec![topology.render(g, separator)];
        rec.extend(values.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))
}

/// Reads a contingency table: a header of column labels after one leading
/// cell, then one labeled row per line.
pub fn read_contingency_from<R: Read>(reader: R) -> CliResult<ContingencyTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let col_labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut row_labels = Vec::new();
    let mut observed = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != header.len() {
            return Err(CliError::Data(format!("row {}: expected {} fields", i + 2, header.len())));
        }
        row_labels.push(rec[0].to_string());
        observed.push(
            rec.iter()
                .skip(1)
                .map(|f| number(f, &format!("row {}", i + 2)))
                .collect::<CliResult<Vec<f64>>>()?,
        );
    }
    Ok(ContingencyTable::new(observed, row_labels, col_labels)?)
}

pub fn read_contingency(path: &Path) -> CliResult<ContingencyTable> {
    read_contingency_from(open(path)?).map_err(|e| e.in_file(path))
}

pub fn contingency_csv(table: &ContingencyTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(table.col_labels().iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for (label, row) in table.row_labels().iter().zip(table.observed()) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activity_round_trip() {
        let ds = Dataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![6.4806, -0.1 + 0.2, 1e-300],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_activity_to(&mut buf, &ds).unwrap();
        assert_eq!(read_activity_from(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn descriptor_columns_are_matched_by_id() {
        let topo = GeneticTopology::binary(2).unwrap();
        let ds = Dataset::new(vec!["a".into(), "b".into(), "c".into()], vec![1.0, 2.0, 3.0]).unwrap();
        let text = "genotype,c,a,b\n01,3,1,2\n10,6,4,5\n";
        let provider = read_descriptors_from(text.as_bytes(), &topo, "", &ds).unwrap();
        let g = topo.parse("01", "").unwrap();
        use galgo_core::descriptors::DescriptorProvider;
        assert_eq!(provider.provide(&g).unwrap().values, vec![1.0, 2.0, 3.0]);
        assert!(read_descriptors_from("genotype,a,b\n01,1,2\n".as_bytes(), &topo, "", &ds).is_err());
        assert!(read_descriptors_from("genotype,a,b,c,d\n01,1,2,3,4\n".as_bytes(), &topo, "", &ds)
            .is_err());
        assert!(read_descriptors_from("genotype,a,b,c\n01,1,x,3\n".as_bytes(), &topo, "", &ds)
            .is_err());
    }

    #[test]
    fn contingency_round_trip() {
        let text = ",P,T,D\nP,13,6,13\nT,13,8,21\nD,3,5,32\n";
        let table = read_contingency_from(text.as_bytes()).unwrap();
        assert_eq!(table.row_labels(), ["P", "T", "D"]);
        assert_eq!(table.observed()[2], vec![3.0, 5.0, 32.0]);
        assert_eq!(contingency_csv(&table), text);
        assert!(read_contingency_from(",P,T\nP,1\n".as_bytes()).is_err());
    }
}
