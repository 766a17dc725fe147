//! CSV ingestion and export of multi-view datasets and predictions.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use ordinal_core::data::{FeatureMatrix, MultiViewDataset};
use ordinal_core::OrdinalLabel;

use crate::error::PipelineError;

/// Column names shared by the view files.
#[derive(Debug, Clone)]
pub struct CsvLayout {
    pub id_column: String,
    pub label_column: String,
    pub classes: usize,
}

impl Default for CsvLayout {
    fn default() -> Self {
        Self {
            id_column: "id".into(),
            label_column: "label".into(),
            classes: 4,
        }
    }
}

struct ViewTable {
    ids: Vec<u64>,
    labels: Option<Vec<i64>>,
    features: Vec<Vec<f64>>,
    width: usize,
}

fn open(path: &Path) -> Result<csv::Reader<File>, PipelineError> {
    let file = File::open(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn read_view(path: &Path, layout: &CsvLayout) -> Result<ViewTable, PipelineError> {
    let mut reader = open(path)?;
    let header = reader
        .headers()
        .map_err(|e| PipelineError::csv(path, e))?
        .clone();
    let find = |name: &str| header.iter().position(|h| h == name);
    let id_col = find(&layout.id_column).ok_or_else(|| PipelineError::MissingColumn {
        path: path.into(),
        column: layout.id_column.clone(),
    })?;
    let label_col = find(&layout.label_column);
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != id_col && Some(c) != label_col)
        .collect();

    let mut table = ViewTable {
        ids: Vec::new(),
        labels: label_col.map(|_| Vec::new()),
        features: Vec::new(),
        width: feature_cols.len(),
    };
    let mut seen = BTreeSet::new();
    for (i, record) in reader.records().enumerate() {
        // Row numbers are 1-based and count the header line.
        let row = i + 2;
        let record = record.map_err(|e| PipelineError::csv(path, e))?;
        if record.len() != header.len() {
            return Err(PipelineError::RaggedRow {
                path: path.into(),
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        let raw_id = &record[id_col];
        if raw_id.is_empty() {
            return Err(PipelineError::MissingId {
                path: path.into(),
                row,
            });
        }
        let id: u64 = raw_id.parse().map_err(|_| PipelineError::BadId {
            path: path.into(),
            row,
            value: raw_id.to_string(),
        })?;
        if !seen.insert(id) {
            return Err(PipelineError::DuplicateId {
                path: path.into(),
                row,
                id,
            });
        }
        if let (Some(c), Some(labels)) = (label_col, table.labels.as_mut()) {
            let raw = &record[c];
            let label: i64 = raw.parse().map_err(|_| PipelineError::NonIntegerLabel {
                path: path.into(),
                row,
                value: raw.to_string(),
            })?;
            if label < 0 || label as usize >= layout.classes {
                return Err(PipelineError::LabelRange {
                    path: path.into(),
                    row,
                    label,
                    classes: layout.classes,
                });
            }
            labels.push(label);
        }
        let values = feature_cols
            .iter()
            .map(|&c| {
                record[c]
                    .parse::<f64>()
                    .map_err(|_| PipelineError::NonNumeric {
                        path: path.into(),
                        row,
                        column: header[c].to_string(),
                        value: record[c].to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        table.ids.push(id);
        table.features.push(values);
    }
    Ok(table)
}

/// Reads one CSV file per view and aligns them on the sample id.
///
/// Rows are returned in ascending id order. Labels come from every file that
/// carries the label column and must agree.
pub fn load_views_csv(
    paths: &[(String, PathBuf)],
    layout: &CsvLayout,
) -> Result<MultiViewDataset, PipelineError> {
    if paths.is_empty() {
        return Err(PipelineError::Config("no view files given".into()));
    }
    let tables = paths
        .iter()
        .map(|(_, p)| read_view(p, layout))
        .collect::<Result<Vec<_>, _>>()?;

    let reference: BTreeSet<u64> = tables[0].ids.iter().copied().collect();
    for ((view, _), table) in paths.iter().zip(&tables).skip(1) {
        let ids: BTreeSet<u64> = table.ids.iter().copied().collect();
        if let Some(&id) = ids.symmetric_difference(&reference).next() {
            return Err(PipelineError::MisalignedIds {
                view: view.clone(),
                id,
            });
        }
    }

    let mut labels: BTreeMap<u64, i64> = BTreeMap::new();
    for ((_, path), table) in paths.iter().zip(&tables) {
        let Some(view_labels) = &table.labels else {
            continue;
        };
        for (row, (&id, &label)) in table.ids.iter().zip(view_labels).enumerate() {
            if let Some(&prev) = labels.get(&id) {
                if prev != label {
                    return Err(PipelineError::LabelConflict {
                        path: path.clone(),
                        row: row + 2,
                        id,
                    });
                }
            }
            labels.insert(id, label);
        }
    }
    if labels.is_empty() {
        return Err(PipelineError::MissingColumn {
            path: paths[0].1.clone(),
            column: layout.label_column.clone(),
        });
    }

    let ids: Vec<u64> = reference.into_iter().collect();
    let views = tables
        .iter()
        .map(|t| {
            let position: BTreeMap<u64, usize> =
                t.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
            let data: Vec<f64> = ids
                .iter()
                .flat_map(|id| t.features[position[id]].iter().copied())
                .collect();
            FeatureMatrix::new(ids.len(), t.width, data)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let labels = ids
        .iter()
        .map(|id| OrdinalLabel(labels[id] as usize))
        .collect();
    Ok(MultiViewDataset::new(
        paths.iter().map(|(v, _)| v.clone()).collect(),
        views,
        labels,
        ids,
        layout.classes,
    )?)
}

/// Writes `<dir>/<view>.csv` for every view, with `id`, `label` and `f0..` columns.
pub fn write_views_csv(
    data: &MultiViewDataset,
    dir: &Path,
) -> Result<Vec<(String, PathBuf)>, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut written = Vec::new();
    for (v, name) in data.view_names().iter().enumerate() {
        let path = dir.join(format!("{name}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| PipelineError::csv(&path, e))?;
        let x = data.view_at(v);
        let mut header = vec!["id".to_string(), "label".to_string()];
        header.extend((0..x.cols()).map(|c| format!("f{c}")));
        w.write_record(&header)
            .map_err(|e| PipelineError::csv(&path, e))?;
        for i in 0..data.len() {
            let mut record = vec![data.ids()[i].to_string(), data.labels()[i].0.to_string()];
            record.extend(x.row(i).iter().map(|v| v.to_string()));
            w.write_record(&record)
                .map_err(|e| PipelineError::csv(&path, e))?;
        }
        w.flush().map_err(|e| PipelineError::io(&path, e))?;
        written.push((name.clone(), path));
    }
    Ok(written)
}

/// Reads `y_true` and `y_pred` columns of a predictions file.
pub fn read_predictions(
    path: &Path,
) -> Result<(Vec<OrdinalLabel>, Vec<OrdinalLabel>), PipelineError> {
    let mut reader = open(path)?;
    let header = reader
        .headers()
        .map_err(|e| PipelineError::csv(path, e))?
        .clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PipelineError::MissingColumn {
                path: path.into(),
                column: name.into(),
            })
    };
    let (t, p) = (col("y_true")?, col("y_pred")?);
    let mut y_true = Vec::new();
    let mut y_pred = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| PipelineError::csv(path, e))?;
        let row = i + 2;
        let parse = |c: usize| -> Result<OrdinalLabel, PipelineError> {
            let raw = record.get(c).unwrap_or("");
            raw.parse::<usize>()
                .map(OrdinalLabel)
                .map_err(|_| PipelineError::NonIntegerLabel {
                    path: path.into(),
                    row,
                    value: raw.to_string(),
                })
        };
        y_true.push(parse(t)?);
        y_pred.push(parse(p)?);
    }
    Ok((y_true, y_pred))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        File::create(&path)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        path
    }

    fn layout() -> CsvLayout {
        CsvLayout {
            classes: 3,
            ..CsvLayout::default()
        }
    }

    #[test]
    fn aligned_files_load_in_id_order() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(
            dir.path(),
            "a.csv",
            "id,label,x\n3,2,0.3\n1,0,0.1\n2,1,0.2\n",
        );
        let b = write(
            dir.path(),
            "b.csv",
            "id,y,z\n2,20,200\n3,30,300\n1,10,100\n",
        );
        let data = load_views_csv(&[("a".into(), a), ("b".into(), b)], &layout()).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.ids(), &[1, 2, 3]);
        assert_eq!(
            data.labels(),
            &[OrdinalLabel(0), OrdinalLabel(1), OrdinalLabel(2)]
        );
        assert_eq!(data.view("b").unwrap().row(0), &[10.0, 100.0]);
    }

    #[test]
    fn misaligned_ids_name_the_offender() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.csv", "id,label,x\n1,0,0.1\n2,1,0.2\n");
        let b = write(dir.path(), "b.csv", "id,x\n1,1\n5,2\n");
        let err = load_views_csv(&[("a".into(), a), ("b".into(), b)], &layout()).unwrap_err();
        assert!(
            matches!(err, PipelineError::MisalignedIds { id: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("id,label,x\n1,3,0.1\n", "range"),
            ("id,label,x\n1,1.5,0.1\n", "integer"),
            ("id,label,x\n1,1\n", "ragged"),
            ("id,label,x\n,1,0.1\n", "missing id"),
            ("label,x\n1,0.1\n", "column"),
            ("id,label,x\n1,1,abc\n", "number"),
        ];
        for (i, (body, what)) in cases.iter().enumerate() {
            let p = write(dir.path(), &format!("c{i}.csv"), body);
            let err = load_views_csv(&[("v".into(), p)], &layout()).unwrap_err();
            let ok = match *what {
                "range" => matches!(
                    err,
                    PipelineError::LabelRange {
                        label: 3,
                        row: 2,
                        ..
                    }
                ),
                "integer" => matches!(err, PipelineError::NonIntegerLabel { .. }),
                "ragged" => matches!(
                    err,
                    PipelineError::RaggedRow {
                        expected: 3,
                        found: 2,
                        ..
                    }
                ),
                "missing id" => matches!(err, PipelineError::MissingId { row: 2, .. }),
                "column" => matches!(err, PipelineError::MissingColumn { .. }),
                _ => matches!(err, PipelineError::NonNumeric { .. }),
            };
            assert!(ok, "{what}: {err}");
        }
    }

    #[test]
    fn round_trip() {
        let data =
            crate::synth::generate_synthetic(&crate::synth::SynthConfig::default(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_views_csv(&data, dir.path()).unwrap();
        let back = load_views_csv(&paths, &CsvLayout::default()).unwrap();
        assert_eq!(back, data);
    }
}
