use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use super::SurveySchema;
use crate::error::{Error, Result};

/// N×J matrix of 1-based level codes in canonical item order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    values: Array2<u16>,
}

impl ResponseMatrix {
    /// Wraps codes that are already in canonical order; checks ranges.
    pub fn new(values: Array2<u16>, schema: &SurveySchema) -> Result<Self> {
        if values.ncols() != schema.n_items() {
            return Err(Error::DataShape(format!(
                "{} columns for {} items",
                values.ncols(),
                schema.n_items()
            )));
        }
        for (i, row) in values.rows().into_iter().enumerate() {
            for (j, &y) in row.iter().enumerate() {
                let item = schema.item(j);
                if y < 1 || y as usize > item.n_levels() {
                    return Err(Error::Data {
                        row: i + 1,
                        column: item.name.clone(),
                        message: format!("code {y} outside 1..={}", item.n_levels()),
                    });
                }
            }
        }
        Ok(ResponseMatrix { values })
    }

    pub(crate) fn from_trusted(values: Array2<u16>) -> Self {
        ResponseMatrix { values }
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.values.ncols()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u16 {
        self.values[[i, j]]
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, u16> {
        self.values.row(i)
    }

    pub fn values(&self) -> &Array2<u16> {
        &self.values
    }
}

/// Reads a response CSV. Header names must match the schema's item names in
/// any order; cells hold level labels or 1-based integer codes.
pub fn load_responses<R: Read>(reader: R, schema: &SurveySchema) -> Result<ResponseMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let j_total = schema.n_items();
    if header.len() != j_total {
        return Err(Error::DataShape(format!(
            "header has {} columns, schema has {j_total} items",
            header.len()
        )));
    }
    // column position in file -> canonical item index
    let mut target = Vec::with_capacity(j_total);
    let mut seen = vec![false; j_total];
    for name in header.iter() {
        let j = schema
            .position(name)
            .ok_or_else(|| Error::DataShape(format!("unknown column `{name}`")))?;
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::DataShape(format!("duplicate column `{name}`")));
        }
        target.push(j);
    }
    let lookups: Vec<HashMap<&str, u16>> = schema
        .items()
        .iter()
        .map(|item| {
            item.levels
                .iter()
                .enumerate()
                .map(|(k, l)| (l.as_str(), k as u16 + 1))
                .collect()
        })
        .collect();

    let mut data = Vec::new();
    let mut n = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != j_total {
            return Err(Error::Data {
                row,
                column: String::new(),
                message: format!("{} cells, expected {j_total}", record.len()),
            });
        }
        let mut codes = vec![0u16; j_total];
        for (c, cell) in record.iter().enumerate() {
            let j = target[c];
            let item = schema.item(j);
            let fail = |message: String| Error::Data {
                row,
                column: item.name.clone(),
                message,
            };
            if cell.is_empty() {
                return Err(fail("missing value".into()));
            }
            let code = match lookups[j].get(cell) {
                Some(&code) => code,
                None => match cell.parse::<i64>() {
                    Ok(v) if v >= 1 && v as usize <= item.n_levels() => v as u16,
                    Ok(v) => {
                        return Err(fail(format!(
                            "code {v} outside 1..={}",
                            item.n_levels()
                        )))
                    }
                    Err(_) => return Err(fail(format!("unknown label `{cell}`"))),
                },
            };
            codes[j] = code;
        }
        data.extend(codes);
        n += 1;
    }
    if n == 0 {
        return Err(Error::DataShape("no data rows".into()));
    }
    let values = Array2::from_shape_vec((n, j_total), data).expect("row-major shape");
    Ok(ResponseMatrix { values })
}

pub fn read_responses(path: impl AsRef<Path>, schema: &SurveySchema) -> Result<ResponseMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_responses(std::io::BufReader::new(file), schema)
}

/// Writes responses with a header in canonical order, using level labels.
pub fn write_responses<W: Write>(
    writer: W,
    schema: &SurveySchema,
    responses: &ResponseMatrix,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(schema.items().iter().map(|it| it.name.as_str()))?;
    for row in responses.values.rows() {
        w.write_record(
            row.iter()
                .enumerate()
                .map(|(j, &y)| schema.item(j).label(y as usize)),
        )?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
