use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{csv_error, csv_writer, finish, format_error, open, read_version_line, record_line, write_row};
use crate::error::Result;
use crate::geom::TileId;
use crate::gpmap::TileMap;

fn columns(dim: usize) -> Vec<String> {
    ["tile_a", "tile_b", "tile_k", "row", "mean"]
        .into_iter()
        .map(String::from)
        .chain((0..dim).map(|j| format!("cov_{j}")))
        .collect()
}

/// Writes tile beliefs, one row per state entry: the mean and that row of
/// the covariance. All tiles must share one state dimension.
pub fn write_map_state(path: &Path, maps: &BTreeMap<TileId, Arc<TileMap>>) -> Result<()> {
    let dim = maps.values().next().map_or(0, |m| m.dim());
    let header = columns(dim);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = csv_writer(path, "mapstate", &header)?;
    for (t, map) in maps {
        if map.dim() != dim {
            return Err(format_error(path, 0, format!("tile {t} has dimension {} instead of {dim}", map.dim())));
        }
        for r in 0..dim {
            let mut fields: Vec<String> = [t.a, t.b, t.k, r as i32].iter().map(i32::to_string).collect();
            fields.push(map.mean[r].to_string());
            fields.extend(map.cov.row(r).iter().map(f64::to_string));
            write_row(&mut csv, path, &fields)?;
        }
    }
    finish(csv, path)
}

/// Reads tile beliefs written by [`write_map_state`].
pub fn read_map_state(path: &Path) -> Result<BTreeMap<TileId, Arc<TileMap>>> {
    let mut reader = open(path)?;
    read_version_line(&mut reader, path, "mapstate")?;
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = csv.headers().map_err(|e| csv_error(path, e))?.clone();
    let dim = header.len().saturating_sub(5);
    if header.iter().ne(columns(dim).iter().map(String::as_str)) {
        return Err(format_error(path, 2, "unexpected map state columns"));
    }
    let mut maps = BTreeMap::new();
    let mut current: Option<(TileId, TileMap, usize)> = None;
    for row in csv.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = record_line(&row);
        if row.len() != dim + 5 {
            return Err(format_error(path, line, format!("expected {} fields, found {}", dim + 5, row.len())));
        }
        let int = |k: usize| {
            row[k]
                .parse::<i32>()
                .map_err(|_| format_error(path, line, format!("column {}: `{}` is not an integer", k + 1, &row[k])))
        };
        let tile = TileId::new(int(0)?, int(1)?, int(2)?);
        let r = int(3)?;
        let values = row
            .iter()
            .skip(4)
            .map(|f| f.parse::<f64>().map_err(|_| format_error(path, line, format!("`{f}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        if r == 0 {
            if let Some((t, _, seen)) = &current {
                return Err(format_error(path, line, format!("tile {t} ends after {seen} of {dim} rows")));
            }
            if maps.contains_key(&tile) {
                return Err(format_error(path, line, format!("tile {tile} appears twice")));
            }
            current = Some((
                tile,
                TileMap {
                    mean: DVector::zeros(dim),
                    cov: DMatrix::zeros(dim, dim),
                },
                0,
            ));
        }
        let Some((t, map, seen)) = current.as_mut() else {
            return Err(format_error(path, line, "tile rows must start at row 0"));
        };
        if *t != tile || r as usize != *seen {
            return Err(format_error(path, line, format!("expected row {seen} of tile {t}")));
        }
        map.mean[*seen] = values[0];
        map.cov.row_mut(*seen).iter_mut().zip(&values[1..]).for_each(|(c, v)| *c = *v);
        *seen += 1;
        if *seen == dim {
            let (t, map, _) = current.take().expect("tile in progress");
            maps.insert(t, Arc::new(map));
        }
    }
    if let Some((t, _, seen)) = current {
        return Err(format_error(path, 0, format!("tile {t} ends after {seen} of {dim} rows")));
    }
    Ok(maps)
}
