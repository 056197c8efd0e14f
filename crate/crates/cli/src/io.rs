//! Density file parsing and the text output writers.
//!
//! Density files carry a one-line header `nx ny xmin xmax ymin ymax`
//! followed by `nx*ny` whitespace-separated nonnegative values in row-major
//! order (x fastest). Values are normalized to total mass 1 on load.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use emdflux::lattice::LatticeGrid;
use emdflux::{Density, Flux, Potential};

use crate::CliError;

/// Locale-independent float formatting with 12 significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.11e}")
}

fn parse_token<T: std::str::FromStr>(
    token: Option<&str>,
    what: &str,
    path: &Path,
) -> Result<T, CliError> {
    let token = token.ok_or_else(|| {
        CliError::Usage(format!("{}: missing {what}", path.display()))
    })?;
    token.parse().map_err(|_| {
        CliError::Usage(format!("{}: cannot parse {what} from '{token}'", path.display()))
    })
}

/// Read a density file into a normalized field on its cell-centered grid.
pub fn load_density(path: &Path) -> Result<Density, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut tokens = text.split_whitespace();

    let nx: usize = parse_token(tokens.next(), "nx", path)?;
    let ny: usize = parse_token(tokens.next(), "ny", path)?;
    let xmin: f64 = parse_token(tokens.next(), "xmin", path)?;
    let xmax: f64 = parse_token(tokens.next(), "xmax", path)?;
    let ymin: f64 = parse_token(tokens.next(), "ymin", path)?;
    let ymax: f64 = parse_token(tokens.next(), "ymax", path)?;
    if nx == 0 || ny == 0 {
        return Err(CliError::Usage(format!("{}: nx and ny must be positive", path.display())));
    }
    if xmax <= xmin || ymax <= ymin {
        return Err(CliError::Usage(format!(
            "{}: bounding box must have positive extent",
            path.display()
        )));
    }
    let hx = (xmax - xmin) / nx as f64;
    let hy = (ymax - ymin) / ny as f64;
    if (hx - hy).abs() > 1e-9 {
        return Err(CliError::Usage(format!(
            "{}: spacing must be uniform, got dx={hx} dy={hy}",
            path.display()
        )));
    }

    let mut values = Vec::with_capacity(nx * ny);
    for k in 0..nx * ny {
        values.push(parse_token::<f64>(tokens.next(), &format!("value {k}"), path)?);
    }
    if let Some(extra) = tokens.next() {
        return Err(CliError::Usage(format!(
            "{}: trailing data after {} values ('{extra}')",
            path.display(),
            nx * ny
        )));
    }

    let grid = LatticeGrid::centered(vec![ny, nx], vec![ymin, xmin], hx)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Density::normalize(Arc::new(grid), &values)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: String) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Two columns per check: iteration index and mean residual.
pub fn write_residuals(path: &Path, history: &[(usize, f64)]) -> Result<(), CliError> {
    let mut out = String::new();
    for &(iteration, residual) in history {
        out.push_str(&format!("{iteration} {}\n", fmt_f(residual)));
    }
    write_file(path, out)
}

/// One line per face: `ix iy axis value`, x-face then y-face per vertex.
pub fn write_flux(path: &Path, grid: &LatticeGrid<f64>, flux: &Flux) -> Result<(), CliError> {
    let (ny, nx) = (grid.shape()[0], grid.shape()[1]);
    let mut out = String::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let i = grid.linear_index(&[iy, ix]);
            out.push_str(&format!("{ix} {iy} x {}\n", fmt_f(flux.face(i, 1))));
            out.push_str(&format!("{ix} {iy} y {}\n", fmt_f(flux.face(i, 0))));
        }
    }
    write_file(path, out)
}

/// Row-major grid of potential values: ny lines of nx entries.
pub fn write_potential(
    path: &Path,
    grid: &LatticeGrid<f64>,
    potential: &Potential,
) -> Result<(), CliError> {
    let (ny, nx) = (grid.shape()[0], grid.shape()[1]);
    let mut out = String::new();
    for iy in 0..ny {
        for ix in 0..nx {
            if ix > 0 {
                out.push(' ');
            }
            out.push_str(&fmt_f(potential.values()[grid.linear_index(&[iy, ix])]));
        }
        out.push('\n');
    }
    write_file(path, out)
}
