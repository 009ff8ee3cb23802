//! Dataset readers and writers.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use hnf_core::data::{default_train_count, Dataset, DatasetMeta};
use hnf_core::linalg::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    /// Last column of each row.
    #[default]
    Last,
    /// 0-based column index.
    Index(usize),
    /// Header name; needs a header row.
    Name(String),
}

impl LabelColumn {
    /// Digits become an index, anything else a header name.
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) if s.eq_ignore_ascii_case("last") => LabelColumn::Last,
            Err(_) => LabelColumn::Name(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub label_column: LabelColumn,
    pub delimiter: u8,
    /// `None` detects a header from non-numeric feature cells in row 1.
    pub header: Option<bool>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: LabelColumn::Last,
            delimiter: b',',
            header: None,
        }
    }
}

/// Reads a delimited text file with one sample per row. Labels are mapped
/// to class indices in order of first appearance. Every sample lands in the
/// training split; callers re-split as needed.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_from(BufReader::new(f), path, opts)
}

pub fn load_csv_from<R: Read>(reader: R, path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows: Vec<(usize, csv::StringRecord)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            column: None,
            message: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((i + 1, rec));
    }
    let Some((_, first)) = rows.first() else {
        return Err(Error::format(path, "file contains no rows"));
    };
    let width = first.len();
    if width < 2 {
        return Err(Error::format(path, "need at least one feature column and a label column"));
    }

    let header_names: Option<Vec<String>> = {
        let label_guess = match &opts.label_column {
            LabelColumn::Index(i) => Some(*i),
            _ => Some(width - 1),
        };
        let looks_like_header = first
            .iter()
            .enumerate()
            .any(|(c, v)| Some(c) != label_guess && v.parse::<f64>().is_err());
        let has = opts
            .header
            .unwrap_or(looks_like_header || matches!(opts.label_column, LabelColumn::Name(_)));
        has.then(|| first.iter().map(str::to_string).collect())
    };
    let label_col = match &opts.label_column {
        LabelColumn::Last => width - 1,
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(Error::Config(format!("label column {i} is outside the {width} columns")))
        }
        LabelColumn::Name(n) => header_names
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == n))
            .ok_or_else(|| Error::Config(format!("no column named {n:?} in the header")))?,
    };
    let body = if header_names.is_some() { &rows[1..] } else { &rows[..] };
    if body.is_empty() {
        return Err(Error::format(path, "file has a header but no data rows"));
    }

    let p = width - 1;
    let n = body.len();
    let mut x = Matrix::zeros(p, n);
    let mut labels = Vec::with_capacity(n);
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (j, (row, rec)) in body.iter().enumerate() {
        if rec.len() != width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: *row,
                column: None,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut fi = 0;
        for (c, cell) in rec.iter().enumerate() {
            if c == label_col {
                let next = names.len();
                let k = *index.entry(cell.to_string()).or_insert_with(|| {
                    names.push(cell.to_string());
                    next
                });
                labels.push(k);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: *row,
                column: Some(c + 1),
                message: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: *row,
                    column: Some(c + 1),
                    message: "non-finite value".into(),
                });
            }
            x[(fi, j)] = v;
            fi += 1;
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    Ok(Dataset::new(name, x, labels, names, (0..n).collect(), Vec::new())?)
}

/// Pixels and labels in the big-endian IDX layout. Pixels are scaled to
/// `[0, 1]`; labels must lie in `0..=9`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let (x, labels) = read_idx_pair(images_path, labels_path)?;
    let n = labels.len();
    let names = (0..10).map(|d: usize| d.to_string()).collect();
    Ok(Dataset::new("idx", x, labels, names, (0..n).collect(), Vec::new())?)
}

/// Training and test files together, keeping their canonical split.
pub fn load_idx_split(train: (&Path, &Path), test: (&Path, &Path)) -> Result<Dataset> {
    let (xa, la) = read_idx_pair(train.0, train.1)?;
    let (xb, lb) = read_idx_pair(test.0, test.1)?;
    if xa.rows() != xb.rows() {
        return Err(Error::format(
            test.0,
            format!("images have {} pixels, training images have {}", xb.rows(), xa.rows()),
        ));
    }
    let (na, nb) = (la.len(), lb.len());
    let x = Matrix::hstack(&xa, &xb);
    let labels = la.into_iter().chain(lb).collect();
    let names = (0..10).map(|d: usize| d.to_string()).collect();
    Ok(Dataset::new("idx", x, labels, names, (0..na).collect(), (na..na + nb).collect())?)
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(buf: &[u8], at: usize, path: &Path) -> Result<u32> {
    buf.get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("four bytes")))
        .ok_or_else(|| Error::format(path, "truncated header"))
}

fn read_idx_pair(images_path: &Path, labels_path: &Path) -> Result<(Matrix, Vec<usize>)> {
    let img = read_all(images_path)?;
    let lab = read_all(labels_path)?;
    if be_u32(&img, 0, images_path)? != 0x0000_0803 {
        return Err(Error::format(images_path, "bad magic, expected 0x00000803"));
    }
    if be_u32(&lab, 0, labels_path)? != 0x0000_0801 {
        return Err(Error::format(labels_path, "bad magic, expected 0x00000801"));
    }
    let n = be_u32(&img, 4, images_path)? as usize;
    let rows = be_u32(&img, 8, images_path)? as usize;
    let cols = be_u32(&img, 12, images_path)? as usize;
    let nl = be_u32(&lab, 4, labels_path)? as usize;
    if n != nl {
        return Err(Error::format(labels_path, format!("{nl} labels for {n} images")));
    }
    let p = rows * cols;
    let pixels = &img[16..];
    if pixels.len() != n * p {
        return Err(Error::format(
            images_path,
            format!("expected {} pixel bytes, found {}", n * p, pixels.len()),
        ));
    }
    let label_bytes = &lab[8..];
    if label_bytes.len() != n {
        return Err(Error::format(
            labels_path,
            format!("expected {n} label bytes, found {}", label_bytes.len()),
        ));
    }
    let mut x = Matrix::zeros(p, n);
    for j in 0..n {
        for i in 0..p {
            x[(i, j)] = f64::from(pixels[j * p + i]) / 255.0;
        }
    }
    let mut labels = Vec::with_capacity(n);
    for (j, &l) in label_bytes.iter().enumerate() {
        if l > 9 {
            return Err(Error::format(labels_path, format!("label {l} at index {j} is outside 0..=9")));
        }
        labels.push(usize::from(l));
    }
    Ok((x, labels))
}

/// JSON sidecar written next to an exported CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaSidecar {
    pub name: String,
    pub p: usize,
    pub q: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub label_names: Vec<String>,
    pub split_seed: Option<u64>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl MetaSidecar {
    pub fn of(data: &Dataset) -> Self {
        let DatasetMeta {
            name,
            p,
            q,
            n_train,
            n_test,
            label_names,
            split_seed,
        } = data.meta().clone();
        Self {
            name,
            p,
            q,
            n_train,
            n_test,
            label_names,
            split_seed,
            train: data.train_indices().to_vec(),
            test: data.test_indices().to_vec(),
        }
    }
}

/// Writes one row per sample: features, then the label name. Values use
/// the shortest representation that parses back to the same `f64`. A
/// `<path>.meta.json` sidecar records names and the split.
pub fn export_csv(data: &Dataset, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
    let x = data.x();
    let names = &data.meta().label_names;
    let mut row: Vec<String> = Vec::with_capacity(data.p() + 1);
    for j in 0..data.n() {
        row.clear();
        row.extend((0..data.p()).map(|i| x[(i, j)].to_string()));
        row.push(names[data.labels()[j]].clone());
        w.write_record(&row).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let side = sidecar_path(path);
    let mut f = File::create(&side).map_err(|e| Error::io(&side, e))?;
    let json = serde_json::to_string_pretty(&MetaSidecar::of(data)).expect("sidecar serializes");
    f.write_all(json.as_bytes()).map_err(|e| Error::io(&side, e))
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    s.into()
}

/// Seeded shuffle split; `train_count = None` keeps two thirds.
pub fn resplit(data: Dataset, train_count: Option<usize>, seed: u64) -> Result<Dataset> {
    let k = train_count.unwrap_or_else(|| default_train_count(data.n()));
    Ok(data.with_random_split(k, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, opts: &CsvOptions) -> Result<Dataset> {
        load_csv_from(text.as_bytes(), Path::new("t.csv"), opts)
    }

    #[test]
    fn two_rows_two_classes() {
        let d = parse("1,2,A\n3,4,B\n", &CsvOptions::default()).unwrap();
        assert_eq!((d.p(), d.q(), d.n()), (2, 2, 2));
        assert_eq!(d.t(), &Matrix::identity(2));
        assert_eq!(d.x(), &Matrix::from_rows(&[[1.0, 3.0], [2.0, 4.0]]));
        assert_eq!(d.meta().label_names, ["A", "B"]);
    }

    #[test]
    fn label_by_index_and_name() {
        let by_idx = CsvOptions {
            label_column: LabelColumn::Index(0),
            ..CsvOptions::default()
        };
        let d = parse("x,1,2\ny,3,4\nx,5,6\n", &by_idx).unwrap();
        assert_eq!(d.labels(), [0, 1, 0]);
        assert_eq!(d.x().row(0), [1.0, 3.0, 5.0]);

        let by_name = CsvOptions {
            label_column: LabelColumn::Name("cls".into()),
            delimiter: b';',
            ..CsvOptions::default()
        };
        let d = parse("a;cls;b\n1;u;2\n3;v;4\n", &by_name).unwrap();
        assert_eq!(d.labels(), [0, 1]);
        assert_eq!(d.x().row(1), [2.0, 4.0]);
    }

    #[test]
    fn header_is_detected() {
        let d = parse("f1,f2,label\n1,2,A\n", &CsvOptions::default()).unwrap();
        assert_eq!(d.n(), 1);
    }

    #[test]
    fn ragged_row_names_the_row() {
        match parse("1,2,A\n3,B\n", &CsvOptions::default()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_numeric_names_row_and_column() {
        let opts = CsvOptions {
            header: Some(false),
            ..CsvOptions::default()
        };
        match parse("1,2,A\n3,x,B\n", &opts) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, Some(2))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file() {
        assert!(matches!(parse("", &CsvOptions::default()), Err(Error::Format { .. })));
    }
}
