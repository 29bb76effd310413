//! CSV layout: `id,label,f0,…,f{d-1}[,detections]`.
//!
//! The label cell may be empty. For pool files a present label is the oracle
//! label. The detections cell encodes `confidence:z0;z1;…` records joined by
//! `|`.

use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, Detection, DetectionSet, Example, SplitRole};
use crate::error::{Error, Result};
use crate::fsutil::{fmt_f64, write_atomic};

pub fn load_csv(path: &Path, role: SplitRole, class_names: Vec<String>) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, role, class_names, &path.display().to_string())
}

pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(dataset, &mut buf)?;
    write_atomic(path, &buf)
}

pub fn write_csv<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let dim = dataset.feature_dim().unwrap_or(0);
    let with_detections = dataset.examples().iter().any(|e| e.detections.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    if with_detections {
        header.push("detections".into());
    }
    w.write_record(&header).map_err(csv_write_err)?;
    for e in dataset.examples() {
        let label = match dataset.role() {
            SplitRole::Pool => e.oracle_label(),
            _ => e.label,
        };
        let mut row = vec![
            e.id.to_string(),
            label.map(|l| l.to_string()).unwrap_or_default(),
        ];
        row.extend(e.features.iter().map(|&x| fmt_f64(x)));
        if with_detections {
            row.push(
                e.detections
                    .as_ref()
                    .map(encode_detections)
                    .unwrap_or_default(),
            );
        }
        w.write_record(&row).map_err(csv_write_err)?;
    }
    w.flush()
        .map_err(|e| Error::invalid(format!("csv flush failed: {e}")))?;
    Ok(())
}

fn csv_write_err(e: csv::Error) -> Error {
    Error::invalid(format!("csv write failed: {e}"))
}

pub fn read_csv<R: Read>(
    input: R,
    role: SplitRole,
    class_names: Vec<String>,
    origin: &str,
) -> Result<Dataset> {
    let err = |line: u64, message: String| Error::Parse {
        path: origin.to_string(),
        line: line as usize,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| err(1, format!("unreadable header: {e}")))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 2 || cols[0] != "id" || cols[1] != "label" {
        return Err(err(1, "header must start with `id,label`".into()));
    }
    let mut dim = 0;
    let mut has_detections = false;
    for (i, name) in cols[2..].iter().enumerate() {
        if *name == format!("f{dim}") && !has_detections {
            dim += 1;
        } else if *name == "detections" && i + 3 == cols.len() {
            has_detections = true;
        } else {
            return Err(err(1, format!("unknown or out-of-order column `{name}`")));
        }
    }
    let num_classes = class_names.len();
    let mut examples = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            err(line, format!("malformed row: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != cols.len() {
            return Err(err(
                line,
                format!(
                    "expected {} fields ({dim} features), found {}",
                    cols.len(),
                    rec.len()
                ),
            ));
        }
        let id: u64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| err(line, format!("bad id `{}`", &rec[0])))?;
        if !seen.insert(id) {
            return Err(err(line, format!("duplicate id {id}")));
        }
        let label = match rec[1].trim() {
            "" => None,
            s => {
                let l: usize = s
                    .parse()
                    .map_err(|_| err(line, format!("bad label `{s}`")))?;
                if l >= num_classes {
                    return Err(err(
                        line,
                        format!("label {l} out of range for {num_classes} classes"),
                    ));
                }
                Some(l)
            }
        };
        let features = (0..dim)
            .map(|i| {
                let cell = &rec[2 + i];
                cell.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(line, format!("bad value `{cell}` in column f{i}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut example = match (role, label) {
            (SplitRole::Pool, Some(l)) => Example::unlabeled(id, features).with_oracle(l),
            (SplitRole::Pool, None) => Example::unlabeled(id, features),
            (_, Some(l)) => Example::labeled(id, features, l),
            (SplitRole::Train, None) => {
                return Err(err(line, format!("train example {id} has no label")))
            }
            (_, None) => Example::unlabeled(id, features),
        };
        if has_detections {
            let cell = &rec[2 + dim];
            if !cell.trim().is_empty() {
                let ds = decode_detections(cell).map_err(|m| err(line, m))?;
                example = example.with_detections(ds);
            }
        }
        examples.push(example);
    }
    Dataset::new(role, class_names, examples)
}

fn encode_detections(ds: &DetectionSet) -> String {
    ds.detections
        .iter()
        .map(|d| {
            let z: Vec<String> = d.logits.iter().map(|&v| fmt_f64(v)).collect();
            format!("{}:{}", fmt_f64(d.confidence), z.join(";"))
        })
        .collect::<Vec<_>>()
        .join("|")
}

fn decode_detections(cell: &str) -> std::result::Result<DetectionSet, String> {
    let mut detections = Vec::new();
    for part in cell.split('|') {
        let (conf, logits) = part
            .split_once(':')
            .ok_or_else(|| format!("detection `{part}` lacks `confidence:` prefix"))?;
        let confidence: f64 = conf
            .trim()
            .parse()
            .map_err(|_| format!("bad detection confidence `{conf}`"))?;
        let logits = logits
            .split(';')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad detection logit `{v}`"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        detections.push(Detection { logits, confidence });
    }
    DetectionSet::new(detections).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::default_class_names;

    fn parse(text: &str, role: SplitRole) -> Result<Dataset> {
        read_csv(text.as_bytes(), role, default_class_names(3), "fixture.csv")
    }

    #[test]
    fn short_row_names_its_line() {
        let text = "id,label,f0,f1,f2,f3\n1,0,1,2,3,4\n2,1,1,2,3\n";
        match parse(text, SplitRole::Train).unwrap_err() {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 3);
                assert_eq!(path, "fixture.csv");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_id_and_unknown_column() {
        let dup = "id,label,f0\n1,0,1\n1,1,2\n";
        assert!(matches!(
            parse(dup, SplitRole::Train),
            Err(Error::Parse { line: 3, .. })
        ));
        let unknown = "id,label,f0,weight\n1,0,1,2\n";
        assert!(matches!(
            parse(unknown, SplitRole::Train),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn pool_without_labels_has_no_oracle() {
        let text = "id,label,f0,f1\n10,,0.5,1\n11,,0.25,2\n12,,1e-3,3\n13,,-4,4\n14,,7,5\n";
        let pool = parse(text, SplitRole::Pool).unwrap();
        assert_eq!(pool.len(), 5);
        assert!(pool
            .examples()
            .iter()
            .all(|e| e.label.is_none() && e.oracle_label().is_none()));
        assert!(crate::data::OracleLabels::from_pool(&pool).is_err());
    }

    #[test]
    fn pool_labels_become_oracle_labels() {
        let text = "id,label,f0\n1,2,0.5\n2,0,0.25\n";
        let pool = parse(text, SplitRole::Pool).unwrap();
        assert_eq!(pool.examples()[0].label, None);
        assert_eq!(pool.examples()[0].oracle_label(), Some(2));
    }

    #[test]
    fn detections_round_trip() {
        let ds = DetectionSet::new(vec![
            Detection {
                logits: vec![0.1, -2.0, 3.5],
                confidence: 0.9,
            },
            Detection {
                logits: vec![1.0, 0.0, 0.0],
                confidence: 0.25,
            },
        ])
        .unwrap();
        let pool = Dataset::new(
            SplitRole::Pool,
            default_class_names(3),
            vec![
                Example::unlabeled(1, vec![0.0])
                    .with_oracle(1)
                    .with_detections(ds),
                Example::unlabeled(2, vec![1.0]).with_oracle(0),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&pool, &mut buf).unwrap();
        let back = read_csv(
            buf.as_slice(),
            SplitRole::Pool,
            default_class_names(3),
            "mem",
        )
        .unwrap();
        assert_eq!(back, pool);
    }
}
