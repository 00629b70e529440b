//! CSV and JSON formats for spectra, maps, idler files, pulses and sweeps.
//!
//! Every writer emits the header constant next to it; the readers accept
//! columns in any order and report the full expected set when one is missing.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::cmm::CwResponse;
use crate::data::{IdlerSpectrum, MeasuredMap};
use crate::error::{Error, Result};
use crate::jsa::Jsa;
use crate::shaping::{EmissionResult, SweepCell};

pub const SPECTRUM_COLUMNS: [&str; 7] =
    ["omega_offset_rad_s", "T_s", "T_iplus", "T_iminus", "eta_iplus", "eta_iminus", "zeta_db"];
pub const MAP_COLUMNS: [&str; 3] = ["wavelength_nm", "voltage_V", "transmission"];
/// Map files may carry this extra column to hold several datasets.
pub const MAP_DATASET_COLUMN: &str = "dataset_id";
pub const IDLER_COLUMNS: [&str; 4] = ["wavelength_nm", "p_iplus_w", "p_iminus_w", "dataset_id"];
pub const EMISSION_COLUMNS: [&str; 8] = ["t", "chi", "S_out_re", "S_out_im", "p_o", "p_s", "p_iminus", "p_b"];
pub const CONTROL_COLUMNS: [&str; 3] = ["t", "chi_re", "chi_im"];
pub const SWEEP_COLUMNS: [&str; 4] = ["G", "QL_Qo", "eta_out", "dw_over_gamma"];
/// First header cell of a JSA matrix; the rest of the header row holds the
/// idler offsets and each row starts with its signal offset.
pub const JSA_CORNER: &str = "omega_s_rad_s\\omega_i_rad_s";

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn num(x: f64) -> String {
    // shortest round-trip representation keeps output byte-stable
    format!("{x:e}")
}

pub fn write_spectrum<W: Write>(w: W, rows: &[CwResponse]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(SPECTRUM_COLUMNS)?;
    for r in rows {
        out.write_record([
            num(r.omega_offset),
            num(r.t_s.norm_sqr()),
            num(r.t_i_plus.norm_sqr()),
            num(r.t_i_minus.norm_sqr()),
            num(r.eta_i_plus),
            num(r.eta_i_minus),
            num(r.zeta_db()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Long-format map: one line per (voltage, wavelength), voltages outermost.
/// With `with_id` the dataset id is written as a fourth column.
pub fn write_map<W: Write>(w: W, map: &MeasuredMap, with_id: bool) -> Result<()> {
    let mut out = writer(w);
    if with_id {
        out.write_record(MAP_COLUMNS.iter().copied().chain([MAP_DATASET_COLUMN]))?;
    } else {
        out.write_record(MAP_COLUMNS)?;
    }
    for (v, row) in map.voltage.iter().zip(&map.transmission) {
        for (l, t) in map.wavelength_nm.iter().zip(row) {
            let mut rec = vec![num(*l), num(*v), num(*t)];
            if with_id {
                rec.push(map.dataset_id.clone());
            }
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_idler<W: Write>(w: W, spectra: &[(&str, &IdlerSpectrum)]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(IDLER_COLUMNS)?;
    for (id, s) in spectra {
        for i in 0..s.wavelength_nm.len() {
            out.write_record([num(s.wavelength_nm[i]), num(s.p_iplus_w[i]), num(s.p_iminus_w[i]), id.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_emission<W: Write>(w: W, r: &EmissionResult) -> Result<()> {
    let mut out = writer(w);
    out.write_record(EMISSION_COLUMNS)?;
    for i in 0..r.t.len() {
        out.write_record([
            num(r.t[i]),
            num(r.chi[i]),
            num(r.s_out[i][0]),
            num(r.s_out[i][1]),
            num(r.p_o[i]),
            num(r.p_s[i]),
            num(r.p_i_minus[i]),
            num(r.p_b[i]),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_control<W: Write>(w: W, samples: &[(f64, C64)]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(CONTROL_COLUMNS)?;
    for (t, c) in samples {
        out.write_record([num(*t), num(c.re), num(c.im)])?;
    }
    out.flush()?;
    Ok(())
}

/// Sweep table; infeasible cells leave η_out and Δω/γ_o empty.
pub fn write_sweep<W: Write>(w: W, cells: &[SweepCell]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(SWEEP_COLUMNS)?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    for c in cells {
        out.write_record([num(c.big_g), num(c.ql_over_qo), opt(c.eta_out), opt(c.dw_over_gamma())])?;
    }
    out.flush()?;
    Ok(())
}

/// |f(Ω_s, Ω_i)|² as a matrix with the frequency axes in the first row and
/// column.
pub fn write_jsa_intensity<W: Write>(w: W, jsa: &Jsa) -> Result<()> {
    let mut out = writer(w);
    let head: Vec<String> =
        std::iter::once(JSA_CORNER.to_string()).chain(jsa.idler.omega.iter().map(|&x| num(x))).collect();
    out.write_record(&head)?;
    for (i, &ws) in jsa.signal.omega.iter().enumerate() {
        let row: Vec<String> = std::iter::once(num(ws))
            .chain((0..jsa.idler.omega.len()).map(|j| num(jsa.amplitude[(i, j)].norm_sqr())))
            .collect();
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_json(File::create(path)?, value)
}

struct Table {
    index: BTreeMap<String, usize>,
    records: Vec<csv::StringRecord>,
}

impl Table {
    fn read<R: Read>(r: R, what: &str, required: &[&str]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        let index: BTreeMap<String, usize> = headers.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
        let missing: Vec<&str> = required.iter().copied().filter(|c| !index.contains_key(*c)).collect();
        if !missing.is_empty() {
            return Err(Error::Data(format!(
                "{what}: missing column(s) {}; expected columns: {}",
                missing.join(", "),
                required.join(", ")
            )));
        }
        let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { index, records })
    }

    fn text<'a>(&self, rec: &'a csv::StringRecord, col: &str) -> Option<&'a str> {
        self.index.get(col).and_then(|&i| rec.get(i))
    }

    fn float(&self, what: &str, line: usize, rec: &csv::StringRecord, col: &str) -> Result<f64> {
        let s = self.text(rec, col).unwrap_or("");
        s.parse::<f64>()
            .map_err(|_| Error::Data(format!("{what}: line {}: column {col} holds '{s}', not a number", line + 2)))
    }
}

/// Reads one or more long-format maps. Rows are grouped by the optional
/// dataset column (`default_id` otherwise); inside a dataset every voltage
/// must cover the same wavelength grid.
/// One CSV row of three numeric columns.
type Triple = (f64, f64, f64);

pub fn read_maps<R: Read>(r: R, default_id: &str) -> Result<Vec<MeasuredMap>> {
    let what = format!("map {default_id}");
    let t = Table::read(r, &what, &MAP_COLUMNS)?;
    let mut groups: Vec<(String, Vec<Triple>)> = Vec::new();
    for (k, rec) in t.records.iter().enumerate() {
        let id = t.text(rec, MAP_DATASET_COLUMN).filter(|s| !s.is_empty()).unwrap_or(default_id).to_string();
        let p = (
            t.float(&what, k, rec, "wavelength_nm")?,
            t.float(&what, k, rec, "voltage_V")?,
            t.float(&what, k, rec, "transmission")?,
        );
        match groups.iter_mut().find(|g| g.0 == id) {
            Some(g) => g.1.push(p),
            None => groups.push((id, vec![p])),
        }
    }
    if groups.is_empty() {
        return Err(Error::Data(format!("{what}: no data rows")));
    }
    groups.into_iter().map(|(id, pts)| assemble_map(&id, pts)).collect()
}

fn assemble_map(id: &str, mut pts: Vec<(f64, f64, f64)>) -> Result<MeasuredMap> {
    pts.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let mut voltages: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<(f64, f64)>> = Vec::new();
    for (l, v, y) in pts {
        if voltages.last() != Some(&v) {
            voltages.push(v);
            rows.push(Vec::new());
        }
        rows.last_mut().unwrap().push((l, y));
    }
    let grid: Vec<f64> = rows[0].iter().map(|p| p.0).collect();
    for (v, row) in voltages.iter().zip(&rows) {
        if row.len() != grid.len() || row.iter().zip(&grid).any(|(p, g)| p.0 != *g) {
            return Err(Error::Data(format!(
                "{id}: the wavelength grid at {v} V differs from the one at {} V",
                voltages[0]
            )));
        }
    }
    let transmission = rows.into_iter().map(|r| r.into_iter().map(|p| p.1).collect()).collect();
    let map = MeasuredMap::new(id, grid, voltages, transmission);
    map.validate()?;
    Ok(map)
}

pub fn read_maps_file(path: &Path) -> Result<Vec<MeasuredMap>> {
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("map");
    read_maps(File::open(path)?, id)
}

/// Reads an idler file into spectra keyed by dataset id, in order of first
/// appearance. Wavelengths are sorted within each dataset.
pub fn read_idler<R: Read>(r: R) -> Result<Vec<(String, IdlerSpectrum)>> {
    let what = "idler file";
    let t = Table::read(r, what, &IDLER_COLUMNS)?;
    let mut out: Vec<(String, Vec<Triple>)> = Vec::new();
    for (k, rec) in t.records.iter().enumerate() {
        let id = t.text(rec, "dataset_id").unwrap_or("").to_string();
        let p = (
            t.float(what, k, rec, "wavelength_nm")?,
            t.float(what, k, rec, "p_iplus_w")?,
            t.float(what, k, rec, "p_iminus_w")?,
        );
        match out.iter_mut().find(|g| g.0 == id) {
            Some(g) => g.1.push(p),
            None => out.push((id, vec![p])),
        }
    }
    out.into_iter()
        .map(|(id, mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let s = IdlerSpectrum {
                wavelength_nm: pts.iter().map(|p| p.0).collect(),
                p_iplus_w: pts.iter().map(|p| p.1).collect(),
                p_iminus_w: pts.iter().map(|p| p.2).collect(),
            };
            s.validate().map_err(|e| Error::Data(format!("dataset {id}: {e}")))?;
            Ok((id, s))
        })
        .collect()
}

pub fn read_idler_file(path: &Path) -> Result<Vec<(String, IdlerSpectrum)>> {
    read_idler(File::open(path)?)
}

/// Attaches idler spectra to maps with the same dataset id. Returns the ids
/// of idler spectra that matched no map.
pub fn attach_idlers(maps: &mut [MeasuredMap], idlers: Vec<(String, IdlerSpectrum)>) -> Vec<String> {
    let mut unmatched = Vec::new();
    for (id, s) in idlers {
        match maps.iter_mut().find(|m| m.dataset_id == id) {
            Some(m) => m.idler = Some(s),
            None => unmatched.push(id),
        }
    }
    unmatched
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_map(id: &str) -> MeasuredMap {
        MeasuredMap::new(id, vec![1550.0, 1550.1, 1550.2], vec![1.0, 2.0], vec![vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]])
    }

    #[test]
    fn map_round_trip() {
        let m = sample_map("a");
        let mut buf = Vec::new();
        write_map(&mut buf, &m, false).unwrap();
        let back = read_maps(buf.as_slice(), "a").unwrap();
        assert_eq!(back, vec![m]);
        assert!(String::from_utf8(buf).unwrap().starts_with("wavelength_nm,voltage_V,transmission\n"));
    }

    #[test]
    fn dataset_column_splits_maps() {
        let mut buf = Vec::new();
        write_map(&mut buf, &sample_map("x"), true).unwrap();
        let mut second = Vec::new();
        write_map(&mut second, &sample_map("y"), true).unwrap();
        let text = String::from_utf8(buf).unwrap() + String::from_utf8(second).unwrap().split_once('\n').unwrap().1;
        let maps = read_maps(text.as_bytes(), "ignored").unwrap();
        assert_eq!(maps.iter().map(|m| m.dataset_id.as_str()).collect::<Vec<_>>(), ["x", "y"]);
    }

    #[test]
    fn missing_column_lists_expected_set() {
        let err = read_idler("wavelength_nm,p_iplus_w\n1550,1e-9\n".as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("p_iminus_w") && msg.contains("dataset_id"), "{msg}");
        assert!(msg.contains("expected columns: wavelength_nm, p_iplus_w, p_iminus_w, dataset_id"));
    }

    #[test]
    fn ragged_grid_is_rejected() {
        let text = "wavelength_nm,voltage_V,transmission\n1550,1,0.1\n1551,1,0.1\n1550,2,0.1\n";
        assert!(matches!(read_maps(text.as_bytes(), "r"), Err(Error::Data(_))));
    }

    #[test]
    fn idler_round_trip_and_attach() {
        let s = IdlerSpectrum { wavelength_nm: vec![1550.0, 1550.5], p_iplus_w: vec![1e-9, 2e-9], p_iminus_w: vec![0.0, 1e-12] };
        let mut buf = Vec::new();
        write_idler(&mut buf, &[("x", &s)]).unwrap();
        let back = read_idler(buf.as_slice()).unwrap();
        assert_eq!(back, vec![("x".to_string(), s.clone())]);
        let mut maps = vec![sample_map("x")];
        assert!(attach_idlers(&mut maps, back).is_empty());
        assert_eq!(maps[0].idler.as_ref(), Some(&s));
    }
}
