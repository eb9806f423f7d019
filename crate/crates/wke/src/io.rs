//! Field files: a little-endian binary layout (`rho_max: f64`, `n: u64`,
//! then `n^3` values in row-major order, `x` slowest) with a JSON sidecar,
//! and CSV radial slices `rho, f(rho e1)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wke_core::fields::{GridField, GridSpec, SpectralField};
use wke_core::math::Vec3;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n: usize,
    pub rho_max: f64,
    pub h: f64,
    pub layout: String,
    pub time: Option<f64>,
    pub description: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_field(path: &Path, field: &GridField) -> Result<(), CliError> {
    let spec = field.spec();
    let mut w = BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| CliError::io(path, e));
    put(&spec.rho_max.to_le_bytes())?;
    put(&(spec.n as u64).to_le_bytes())?;
    for v in field.values() {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes the binary file and its sidecar.
pub fn write_field_with_sidecar(
    path: &Path,
    field: &GridField,
    time: Option<f64>,
    description: &str,
) -> Result<(), CliError> {
    write_field(path, field)?;
    let spec = field.spec();
    let sidecar = Sidecar {
        n: spec.n,
        rho_max: spec.rho_max,
        h: spec.h(),
        layout: "f64 le rho_max, u64 le n, n^3 f64 le values, index (i*n + j)*n + l".into(),
        time,
        description: description.into(),
    };
    let p = sidecar_path(path);
    std::fs::write(&p, serde_json::to_string_pretty(&sidecar)?).map_err(|e| CliError::io(&p, e))
}

pub fn read_field(path: &Path) -> Result<GridField, CliError> {
    let mut r = BufReader::new(File::open(path).map_err(|e| CliError::io(path, e))?);
    let mut b8 = [0u8; 8];
    let mut take = |r: &mut BufReader<File>| -> Result<[u8; 8], CliError> {
        r.read_exact(&mut b8)
            .map_err(|_| CliError::Format(format!("{}: truncated", path.display())))?;
        Ok(b8)
    };
    let rho_max = f64::from_le_bytes(take(&mut r)?);
    let n = u64::from_le_bytes(take(&mut r)?);
    let n = usize::try_from(n).map_err(|_| CliError::Format("grid size overflows".into()))?;
    let spec = GridSpec::new(n, rho_max)?;
    let count = n
        .checked_pow(3)
        .ok_or_else(|| CliError::Format("grid size overflows".into()))?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(f64::from_le_bytes(take(&mut r)?));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| CliError::io(path, e))? != 0 {
        return Err(CliError::Format(format!("{}: trailing bytes", path.display())));
    }
    Ok(GridField::from_values(spec, values)?)
}

/// `rho, value` rows of `f(rho e1)` for `rho = i rho_max / (m - 1)`.
pub fn radial_slice_csv(field: &SpectralField, rho_max: f64, m: usize) -> String {
    let mut out = String::from("rho,value\n");
    let m = m.max(2);
    for i in 0..m {
        let rho = rho_max * i as f64 / (m - 1) as f64;
        out.push_str(&format!("{rho:e},{:e}\n", field.eval(Vec3::new(rho, 0.0, 0.0))));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GridSpec::new(4, 3.0).unwrap();
        let f = SpectralField::gaussian(1.3, 0.7).unwrap();
        let g = GridField::sample(&f, spec).unwrap();
        let p = dir.path().join("f.bin");
        write_field_with_sidecar(&p, &g, Some(0.5), "test").unwrap();
        let back = read_field(&p).unwrap();
        assert_eq!(back.values(), g.values());
        assert_eq!(back.spec(), g.spec());
        let meta: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&p)).unwrap()).unwrap();
        assert_eq!(meta.n, 4);
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 16 + 64 * 8);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        let mut bytes = 2.0f64.to_le_bytes().to_vec();
        bytes.extend(3u64.to_le_bytes());
        bytes.extend(1.0f64.to_le_bytes());
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(read_field(&p), Err(CliError::Format(_))));
    }

    #[test]
    fn radial_slice_has_header_and_rows() {
        let csv = radial_slice_csv(&SpectralField::rayleigh_jeans(1.0).unwrap(), 4.0, 5);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "rho,value");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].ends_with(",1e0"));
    }
}
