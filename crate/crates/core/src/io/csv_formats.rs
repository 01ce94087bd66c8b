//! CSV forms of activation sets and datasets.
//!
//! Activation CSV header: `sample_id,label,prediction,conf_0..conf_{C-1},act_0..act_{U-1}`.
//! Empty `label` / `prediction` cells mean the field is absent; the `conf_*`
//! cells are either all present or all empty. Dataset CSV header:
//! `label,f_0..f_{F-1}`.
//!
//! Floats are written in shortest round-trip form and parsed as `f64`, then
//! narrowed to `f32` with round-to-nearest.

use std::io::{Read, Write};

use super::{FormatError, FormatResult};
use crate::activation_model::{ActivationRecord, ActivationSet};
use crate::nnet::Dataset;

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r)
}

fn map_csv(e: csv::Error) -> FormatError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => FormatError::Io(io),
        other => FormatError::ParseError {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Counts a run of `prefix{0..}` columns starting at `start`.
fn indexed_run(header: &csv::StringRecord, start: usize, prefix: &str) -> usize {
    header
        .iter()
        .skip(start)
        .enumerate()
        .take_while(|(i, name)| *name == format!("{prefix}{i}"))
        .count()
}

fn parse_field<T: std::str::FromStr>(field: &str, line: u64, column: &str) -> FormatResult<T>
where
    T::Err: std::fmt::Display,
{
    field.trim().parse().map_err(|e| FormatError::ParseError {
        line,
        message: format!("column {column}: {e} ({field:?})"),
    })
}

fn parse_f32(field: &str, line: u64, column: &str) -> FormatResult<f32> {
    parse_field::<f64>(field, line, column).map(|v| v as f32)
}

fn optional_index(field: &str, line: u64, column: &str) -> FormatResult<Option<usize>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_field(field, line, column).map(Some)
    }
}

pub fn read_activation_csv<R: Read>(r: R, layer_name: &str) -> FormatResult<ActivationSet> {
    let mut rdr = csv_reader(r);
    let mut rows = rdr.records();
    let header = rows
        .next()
        .ok_or_else(|| FormatError::HeaderMismatch("file is empty".into()))?
        .map_err(map_csv)?;
    let fixed = ["sample_id", "label", "prediction"];
    if header.len() < 3 || header.iter().take(3).ne(fixed) {
        return Err(FormatError::HeaderMismatch(
            "header must start with sample_id,label,prediction".into(),
        ));
    }
    let n_classes = indexed_run(&header, 3, "conf_");
    let n_units = indexed_run(&header, 3 + n_classes, "act_");
    if 3 + n_classes + n_units != header.len() {
        return Err(FormatError::HeaderMismatch(format!(
            "unexpected column {:?}",
            header.get(3 + n_classes + n_units).unwrap_or_default()
        )));
    }

    let mut records = Vec::new();
    let mut presence: Option<(bool, bool, bool)> = None;
    for row in rows {
        let row = row.map_err(map_csv)?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != header.len() {
            return Err(FormatError::RaggedRow {
                line,
                expected: header.len(),
                found: row.len(),
            });
        }
        let sample_id = parse_field(&row[0], line, "sample_id")?;
        let ground_truth = optional_index(&row[1], line, "label")?;
        let predicted = optional_index(&row[2], line, "prediction")?;
        let conf = &row.iter().collect::<Vec<_>>()[3..3 + n_classes];
        let softmax = if conf.iter().all(|c| c.trim().is_empty()) {
            None
        } else {
            Some(
                conf.iter()
                    .enumerate()
                    .map(|(i, c)| parse_f32(c, line, &format!("conf_{i}")))
                    .collect::<FormatResult<Vec<_>>>()?,
            )
        };
        let activations = (0..n_units)
            .map(|i| parse_f32(&row[3 + n_classes + i], line, &format!("act_{i}")))
            .collect::<FormatResult<Vec<_>>>()?;

        let this = (ground_truth.is_some(), predicted.is_some(), softmax.is_some());
        match presence {
            None => presence = Some(this),
            Some(p) if p != this => {
                return Err(FormatError::FlagMismatch(format!(
                    "line {line}: optional columns filled differently from earlier rows"
                )))
            }
            _ => {}
        }
        records.push(ActivationRecord {
            sample_id,
            activations,
            softmax,
            predicted,
            ground_truth,
        });
    }
    Ok(ActivationSet::new(layer_name, n_units, n_classes, records)?)
}

pub fn write_activation_csv<W: Write>(w: W, set: &ActivationSet) -> FormatResult<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["sample_id".to_string(), "label".into(), "prediction".into()];
    header.extend((0..set.n_classes()).map(|i| format!("conf_{i}")));
    header.extend((0..set.n_units()).map(|i| format!("act_{i}")));
    wtr.write_record(&header).map_err(map_csv)?;

    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in set.records() {
        let mut row = vec![r.sample_id.to_string(), opt(r.ground_truth), opt(r.predicted)];
        match &r.softmax {
            Some(s) => row.extend(s.iter().map(f32::to_string)),
            None => row.extend(std::iter::repeat_n(String::new(), set.n_classes())),
        }
        row.extend(r.activations.iter().map(f32::to_string));
        wtr.write_record(&row).map_err(map_csv)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a dataset CSV. `n_classes` defaults to one more than the largest label.
pub fn read_dataset_csv<R: Read>(r: R, n_classes: Option<usize>) -> FormatResult<Dataset> {
    let mut rdr = csv_reader(r);
    let mut rows = rdr.records();
    let header = rows
        .next()
        .ok_or_else(|| FormatError::HeaderMismatch("file is empty".into()))?
        .map_err(map_csv)?;
    if header.get(0) != Some("label") {
        return Err(FormatError::HeaderMismatch("first column must be label".into()));
    }
    let n_features = indexed_run(&header, 1, "f_");
    if 1 + n_features != header.len() {
        return Err(FormatError::HeaderMismatch(format!(
            "unexpected column {:?}",
            header.get(1 + n_features).unwrap_or_default()
        )));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for row in rows {
        let row = row.map_err(map_csv)?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != header.len() {
            return Err(FormatError::RaggedRow {
                line,
                expected: header.len(),
                found: row.len(),
            });
        }
        labels.push(parse_field::<usize>(&row[0], line, "label")?);
        features.push(
            (0..n_features)
                .map(|i| parse_f32(&row[1 + i], line, &format!("f_{i}")))
                .collect::<FormatResult<Vec<_>>>()?,
        );
    }
    let n_classes = n_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    Ok(Dataset::new(features, labels, n_classes)?)
}

pub fn write_dataset_csv<W: Write>(w: W, data: &Dataset) -> FormatResult<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["label".to_string()];
    header.extend((0..data.n_features()).map(|i| format!("f_{i}")));
    wtr.write_record(&header).map_err(map_csv)?;
    for (row, label) in data.features().iter().zip(data.labels()) {
        let mut out = vec![label.to_string()];
        out.extend(row.iter().map(f32::to_string));
        wtr.write_record(&out).map_err(map_csv)?;
    }
    wtr.flush()?;
    Ok(())
}
