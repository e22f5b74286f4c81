//! Pattern files, deltas and exports.
//!
//! A pattern file is a JSON document with sorted keys:
//!
//! ```json
//! {
//!   "cols": 2,
//!   "format_version": 1,
//!   "metadata": { "name": "h2" },
//!   "rows": 2,
//!   "values": [[1, 1], [1, -1]]
//! }
//! ```
//!
//! `write_mask` is present only when the grid carries an explicit mask. In a
//! delta a masked 0 means "demagnetize this cell" while an unmasked 0 means
//! "leave it alone".

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::interaction::{InteractionMap, Normalization};
use crate::pairs::{CanvasLayout, PairSet};
use crate::pattern::PixelGrid;

pub const FORMAT_VERSION: i64 = 1;
pub const PATTERN_EXTENSION: &str = "mixel.json";

pub type Metadata = BTreeMap<String, String>;

fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        json!(v as i64)
    } else {
        json!(v)
    }
}

/// Pattern document as a JSON value.
pub fn pattern_value(grid: &PixelGrid, metadata: &Metadata) -> Value {
    let mut doc = Map::new();
    doc.insert("format_version".into(), json!(FORMAT_VERSION));
    doc.insert("rows".into(), json!(grid.rows()));
    doc.insert("cols".into(), json!(grid.cols()));
    let values: Vec<Value> = (0..grid.rows())
        .map(|r| Value::Array(grid.row(r).iter().map(|&v| number(v)).collect()))
        .collect();
    doc.insert("values".into(), Value::Array(values));
    if let Some(mask) = grid.mask_rows() {
        doc.insert("write_mask".into(), json!(mask));
    }
    doc.insert("metadata".into(), json!(metadata));
    Value::Object(doc)
}

/// Serializes a grid; identical input gives identical bytes.
pub fn save_pattern(grid: &PixelGrid, metadata: &Metadata) -> String {
    let mut s = serde_json::to_string_pretty(&pattern_value(grid, metadata))
        .expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn load_pattern(text: &str) -> Result<(PixelGrid, Metadata)> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    pattern_from_value(&doc)
}

fn field<'a>(doc: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    doc.get(key)
        .ok_or_else(|| Error::Schema(format!("missing field `{key}`")))
}

fn dimension(doc: &Map<String, Value>, key: &str) -> Result<usize> {
    field(doc, key)?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| Error::Schema(format!("`{key}` must be a non-negative integer")))
}

fn nested<'a>(v: &'a Value, key: &str, rows: usize, cols: usize) -> Result<Vec<&'a Vec<Value>>> {
    let outer = v
        .as_array()
        .ok_or_else(|| Error::Schema(format!("`{key}` must be an array of rows")))?;
    if outer.len() != rows {
        return Err(Error::Shape(format!(
            "`{key}` has {} rows, expected {rows}",
            outer.len()
        )));
    }
    outer
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let row = row
                .as_array()
                .ok_or_else(|| Error::Schema(format!("`{key}` row {r} is not an array")))?;
            if row.len() != cols {
                return Err(Error::Shape(format!(
                    "`{key}` row {r} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            Ok(row)
        })
        .collect()
}

/// Validates a parsed pattern document.
pub fn pattern_from_value(doc: &Value) -> Result<(PixelGrid, Metadata)> {
    let doc = doc
        .as_object()
        .ok_or_else(|| Error::Schema("pattern document must be an object".into()))?;
    let version = field(doc, "format_version")?
        .as_i64()
        .ok_or_else(|| Error::Schema("`format_version` must be an integer".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let rows = dimension(doc, "rows")?;
    let cols = dimension(doc, "cols")?;
    let mut values = Vec::with_capacity(rows * cols);
    for (r, row) in nested(field(doc, "values")?, "values", rows, cols)?
        .into_iter()
        .enumerate()
    {
        for (c, v) in row.iter().enumerate() {
            let v = v.as_f64().ok_or_else(|| {
                Error::Schema(format!("value at cell ({r}, {c}) is not a number"))
            })?;
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Validation {
                    row: r,
                    col: c,
                    value: v,
                });
            }
            values.push(v);
        }
    }
    let mut grid = PixelGrid::new(rows, cols, values)?;
    if let Some(mask) = doc.get("write_mask").filter(|m| !m.is_null()) {
        let mut flat = Vec::with_capacity(rows * cols);
        for (r, row) in nested(mask, "write_mask", rows, cols)?
            .into_iter()
            .enumerate()
        {
            for (c, m) in row.iter().enumerate() {
                flat.push(m.as_bool().ok_or_else(|| {
                    Error::Schema(format!("mask at cell ({r}, {c}) is not a boolean"))
                })?);
            }
        }
        grid = grid.with_mask(flat)?;
    }
    let metadata = match doc.get("metadata") {
        None | Some(Value::Null) => Metadata::new(),
        Some(Value::Object(m)) => m
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => Ok((k.clone(), s.clone())),
                _ => Err(Error::Schema(format!("metadata `{k}` must be a string"))),
            })
            .collect::<Result<_>>()?,
        Some(_) => return Err(Error::Schema("`metadata` must be an object".into())),
    };
    Ok((grid, metadata))
}

pub fn write_pattern_file(path: &Path, grid: &PixelGrid, metadata: &Metadata) -> Result<()> {
    fs::write(path, save_pattern(grid, metadata))?;
    Ok(())
}

pub fn read_pattern_file(path: &Path) -> Result<(PixelGrid, Metadata)> {
    load_pattern(&fs::read_to_string(path)?)
}

/// Cells that differ between revisions, masked so that a changed-to-zero cell is still written.
pub fn diff_delta(old: &PixelGrid, new: &PixelGrid) -> Result<PixelGrid> {
    if old.dims() != new.dims() {
        return Err(Error::Shape(format!(
            "cannot diff {:?} against {:?}",
            old.dims(),
            new.dims()
        )));
    }
    let changed: Vec<bool> = old
        .values()
        .iter()
        .zip(new.values())
        .map(|(a, b)| a != b)
        .collect();
    let values = new
        .values()
        .iter()
        .zip(&changed)
        .map(|(&v, &c)| if c { v } else { 0.0 })
        .collect();
    PixelGrid::new(new.rows(), new.cols(), values)?.with_mask(changed)
}

/// Overwrites the masked cells of `base` with the delta.
pub fn apply_delta(base: &PixelGrid, delta: &PixelGrid) -> Result<PixelGrid> {
    if base.dims() != delta.dims() {
        return Err(Error::Shape(format!(
            "delta {:?} does not fit grid {:?}",
            delta.dims(),
            base.dims()
        )));
    }
    let mut out = base.clone().without_mask();
    for r in 0..base.rows() {
        for c in 0..base.cols() {
            if delta.is_masked(r, c) {
                out.set(r, c, delta.get(r, c))?;
            }
        }
    }
    Ok(out)
}

/// Grid values as headerless CSV, one line per row.
pub fn grid_to_csv(grid: &PixelGrid) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for r in 0..grid.rows() {
        w.write_record(grid.row(r).iter().map(|v| v.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn map_to_value(map: &InteractionMap) -> Value {
    let (dx, dy) = map.origin();
    json!({
        "normalization": map.normalization(),
        "origin": { "dx": dx, "dy": dy },
        "ncc": map.ncc_rows(),
        "overlap": map.overlap_rows(),
    })
}

pub fn map_from_value(v: &Value) -> Result<InteractionMap> {
    #[derive(serde::Deserialize)]
    struct Origin {
        dx: i64,
        dy: i64,
    }
    #[derive(serde::Deserialize)]
    struct Doc {
        normalization: Normalization,
        origin: Origin,
        ncc: Vec<Vec<f64>>,
        overlap: Vec<Vec<usize>>,
    }
    let d: Doc = serde_json::from_value(v.clone()).map_err(|e| Error::Schema(e.to_string()))?;
    InteractionMap::from_parts(
        (d.origin.dx, d.origin.dy),
        d.normalization,
        d.ncc,
        d.overlap,
    )
}

/// Writes one pattern file per key and lock; returns the paths in pair order.
pub fn export_pair_set(dir: &Path, set: &PairSet) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (i, pair) in set.pairs.iter().enumerate() {
        for (role, grid) in [("key", &pair.key), ("lock", &pair.lock)] {
            let mut meta = Metadata::new();
            meta.insert("name".into(), format!("pair {i} {role}"));
            meta.insert("seed".into(), set.seed.to_string());
            meta.insert("mode".into(), format!("{:?}", set.mode).to_lowercase());
            meta.insert(
                "row_permutation".into(),
                serde_json::to_string(&pair.permutation).expect("permutation serializes"),
            );
            let path = dir.join(format!("pair{i}_{role}.{PATTERN_EXTENSION}"));
            write_pattern_file(&path, grid, &meta)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

/// Writes the canvas and its token as pattern files.
pub fn export_canvas(dir: &Path, layout: &CanvasLayout) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let labels: Vec<String> = (0..layout.meta_rows)
        .map(|r| {
            (0..layout.meta_cols)
                .map(|c| format!("{:?}", layout.assignment(r, c)).to_lowercase())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    let mut meta = Metadata::new();
    meta.insert("name".into(), "canvas".into());
    meta.insert("assignments".into(), labels.join(";"));
    let canvas = dir.join(format!("canvas.{PATTERN_EXTENSION}"));
    write_pattern_file(&canvas, &layout.canvas, &meta)?;
    let token = dir.join(format!("token.{PATTERN_EXTENSION}"));
    write_pattern_file(
        &token,
        &layout.token,
        &Metadata::from([("name".into(), "token".into())]),
    )?;
    Ok(vec![canvas, token])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::interaction_map;
    use crate::pattern::sylvester_hadamard;
    use crate::toolpath::{compile_plot, DEFAULT_FEED_MM_PER_MIN};
    use proptest::prelude::*;

    #[test]
    fn h2_document() {
        let text = save_pattern(&sylvester_hadamard(2).unwrap(), &Metadata::new());
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["values"], json!([[1, 1], [1, -1]]));
        assert!(text.contains("[\n      1,"), "{text}");
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(v.get("write_mask").is_none());
    }

    #[test]
    fn out_of_range_names_cell() {
        let doc = r#"{"format_version":1,"rows":1,"cols":2,"values":[[0.5,1.5]]}"#;
        assert_eq!(
            load_pattern(doc).unwrap_err(),
            Error::Validation {
                row: 0,
                col: 1,
                value: 1.5
            }
        );
    }

    #[test]
    fn ragged_and_version_errors() {
        let ragged = r#"{"format_version":1,"rows":2,"cols":2,"values":[[1,1],[1]]}"#;
        assert!(matches!(load_pattern(ragged), Err(Error::Shape(_))));
        let v99 = r#"{"format_version":99,"rows":1,"cols":1,"values":[[1]]}"#;
        assert_eq!(
            load_pattern(v99).unwrap_err(),
            Error::UnsupportedVersion(99)
        );
    }

    #[test]
    fn syntax_error_has_position() {
        let e = load_pattern("{\n  \"rows\": 2,\n  oops\n}").unwrap_err();
        assert!(
            matches!(
                e,
                Error::Parse {
                    line: 3,
                    column: 3,
                    ..
                }
            ),
            "{e:?}"
        );
    }

    #[test]
    fn identical_grids_give_empty_delta() {
        let g = sylvester_hadamard(4).unwrap();
        let d = diff_delta(&g, &g).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
        assert_eq!(d.masked_count(), 0);
        assert_eq!(
            compile_plot(&d, (0.0, 0.0), DEFAULT_FEED_MM_PER_MIN).energize_count(),
            0
        );
    }

    #[test]
    fn one_flip_one_masked_cell() {
        let g = sylvester_hadamard(8).unwrap();
        let mut h = g.clone();
        h.set(3, 5, -g.get(3, 5)).unwrap();
        let d = diff_delta(&g, &h).unwrap();
        assert_eq!(d.masked_count(), 1);
        assert!(d.is_masked(3, 5));
        assert_eq!(
            compile_plot(&d, (0.0, 0.0), DEFAULT_FEED_MM_PER_MIN).energize_count(),
            1
        );
    }

    #[test]
    fn dimension_mismatch() {
        let a = PixelGrid::zeros(2, 2).unwrap();
        let b = PixelGrid::zeros(2, 3).unwrap();
        assert!(matches!(diff_delta(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn csv_rows() {
        let csv = grid_to_csv(&sylvester_hadamard(2).unwrap()).unwrap();
        assert_eq!(csv, "1,1\n1,-1\n");
    }

    #[test]
    fn map_json_round_trip() {
        let h = sylvester_hadamard(4).unwrap();
        let m = interaction_map(&h, &h).unwrap();
        let v = map_to_value(&m);
        assert_eq!(v["origin"], json!({"dx": -3, "dy": -3}));
        assert_eq!(map_from_value(&v).unwrap(), m);
    }

    fn arb_grid() -> impl Strategy<Value = PixelGrid> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            (
                prop::collection::vec(
                    prop_oneof![Just(-1.0), Just(0.0), Just(1.0), -1.0..=1.0f64],
                    r * c,
                ),
                prop::option::of(prop::collection::vec(any::<bool>(), r * c)),
            )
                .prop_map(move |(v, m)| {
                    let g = PixelGrid::new(r, c, v).unwrap();
                    match m {
                        Some(m) => g.with_mask(m).unwrap(),
                        None => g,
                    }
                })
        })
    }

    proptest! {
        #[test]
        fn save_load_round_trip(g in arb_grid(), meta in prop::collection::btree_map("[a-z]{1,6}", ".{0,12}", 0..4)) {
            let text = save_pattern(&g, &meta);
            prop_assert_eq!(save_pattern(&g, &meta), text.clone());
            let (back, meta_back) = load_pattern(&text).unwrap();
            prop_assert_eq!(back, g);
            prop_assert_eq!(meta_back, meta);
        }

        #[test]
        fn delta_patches_old_into_new(old in arb_grid(), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let old = old.without_mask();
            let mut new = old.clone();
            for _ in 0..rng.random_range(0..=old.len()) {
                let (r, c) = (rng.random_range(0..old.rows()), rng.random_range(0..old.cols()));
                new.set(r, c, [-1.0, 0.0, 1.0][rng.random_range(0..3)]).unwrap();
            }
            let d = diff_delta(&old, &new).unwrap();
            prop_assert_eq!(apply_delta(&old, &d).unwrap(), new);
        }
    }
}
