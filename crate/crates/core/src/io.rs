//! CSV files with a `# key = value` metadata block above a one-line header.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{ChannelBasis, Symmetry};
use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::extrapolation::{CorrectedTable, ErrorModel, StepTriple};
use crate::fitting::{FitModel, FitReport};
use crate::matcher::AmplitudeVector;
use crate::observables::{SdcsCurve, StepTag, TMatrixTable};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
    /// Line of each entry, for diagnostics.
    lines: Vec<usize>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter().position(|(k, _)| k == key) {
            Some(i) => self.entries[i].1 = value,
            None => {
                self.entries.push((key.to_string(), value));
                self.lines.push(0);
            }
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.iter().position(|(k, _)| k == key).map_or(1, |i| self.lines[i].max(1))
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing metadata entry '{key}'") })
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.require(key)?.parse().map_err(|e: T::Err| Error::Parse {
            line: self.line_of(key),
            message: format!("bad value for '{key}': {e}"),
        })
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        let got = self.require("kind")?;
        if got != kind {
            return Err(Error::Parse { line: self.line_of("kind"), message: format!("expected a {kind} file, found {got}") });
        }
        Ok(())
    }
}

/// Parsed file: metadata, header and data rows with their line numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub meta: Metadata,
    pub header: Vec<String>,
    pub rows: Vec<(usize, Vec<String>)>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = Metadata::new();
        let mut body_start = 0;
        let mut offset = 0;
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    meta.insert(k.trim(), v.trim());
                    *meta.lines.last_mut().expect("just inserted") = i + 1;
                }
                offset += line.len() + 1;
                body_start = i + 1;
            } else if trimmed.is_empty() && body_start == i {
                offset += line.len() + 1;
                body_start = i + 1;
            } else {
                break;
            }
        }
        let body = text.get(offset.min(text.len())..).unwrap_or("");
        let mut reader = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).trim(csv::Trim::All).from_reader(body.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| parse_err(body_start, &e))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() || header.iter().all(|h| h.is_empty()) {
            return Err(Error::Parse { line: body_start + 1, message: "missing header line".into() });
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| parse_err(body_start, &e))?;
            let line = rec.position().map_or(0, |p| p.line() as usize) + body_start;
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Self { meta, header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: self.rows.first().map_or(1, |r| r.0.saturating_sub(1).max(1)),
            message: format!("missing column '{name}'"),
        })
    }

    pub fn field<T: std::str::FromStr>(&self, row: usize, col: usize) -> Result<T> {
        let (line, rec) = &self.rows[row];
        let raw = rec.get(col).ok_or_else(|| Error::Parse { line: *line, message: format!("missing field {}", col + 1) })?;
        raw.parse().map_err(|_| Error::Parse {
            line: *line,
            message: format!("cannot parse '{raw}' in column '{}'", self.header[col]),
        })
    }
}

fn parse_err(offset: usize, e: &csv::Error) -> Error {
    let line = e.position().map_or(offset + 1, |p| p.line() as usize + offset);
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("found {len} fields, expected {expected_len}")
        }
        _ => e.to_string(),
    };
    Error::Parse { line, message }
}

fn render(meta: &Metadata, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for (k, v) in meta.entries() {
        let _ = writeln!(out, "# {k} = {v}");
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn degrees_string(b: &ChannelBasis) -> String {
    b.degrees().iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

fn basis_from(meta: &Metadata) -> Result<ChannelBasis> {
    let symmetry: Symmetry = meta.parse("symmetry")?;
    let degrees = meta
        .require("degrees")?
        .split_whitespace()
        .map(|d| d.parse::<u32>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Parse { line: meta.line_of("degrees"), message: format!("bad degree list: {e}") })?;
    ChannelBasis::new(symmetry, degrees).map_err(|e| Error::Parse { line: meta.line_of("degrees"), message: e.to_string() })
}

fn table_meta(kind: &str, t: &TMatrixTable) -> Metadata {
    let mut m = Metadata::new();
    m.insert("kind", kind)
        .insert("symmetry", t.symmetry())
        .insert("energy_ry", num(t.energy))
        .insert("step", t.tag)
        .insert("degrees", degrees_string(&t.basis));
    m
}

fn pair_cells(t: &TMatrixTable, i: usize, j: usize) -> Vec<String> {
    let d = t.basis.degrees();
    vec![t.pair_label(i, j).to_string(), d[i].to_string(), d[j].to_string()]
}

pub fn tmatrix_csv(t: &TMatrixTable, extra: &Metadata) -> String {
    let mut meta = table_meta("tmatrix", t);
    for (k, v) in extra.entries() {
        meta.insert(k, v);
    }
    let n = t.dim();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let z = t.entries[(i, j)];
            let mut r = pair_cells(t, i, j);
            r.extend([num(z.re), num(z.im), num(z.norm())]);
            rows.push(r);
        }
    }
    render(&meta, &["P", "n", "n_prime", "re", "im", "modulus"], &rows)
}

/// Reads the pair-labelled complex columns `{prefix}re` and `{prefix}im`.
fn read_entries(doc: &Document, basis: &ChannelBasis, prefix: &str) -> Result<DMatrix<Complex64>> {
    let n = basis.len();
    let cp = doc.column("P")?;
    let cre = doc.column(&format!("{prefix}re"))?;
    let cim = doc.column(&format!("{prefix}im"))?;
    let mut seen = vec![false; n * n];
    let mut m = DMatrix::zeros(n, n);
    for r in 0..doc.rows.len() {
        let line = doc.rows[r].0;
        let p: usize = doc.field(r, cp)?;
        if !(1..=n * n).contains(&p) {
            return Err(Error::Parse { line, message: format!("pair label {p} outside 1..={}", n * n) });
        }
        if std::mem::replace(&mut seen[p - 1], true) {
            return Err(Error::Parse { line, message: format!("duplicate pair label {p}") });
        }
        m[((p - 1) / n, (p - 1) % n)] = Complex64::new(doc.field(r, cre)?, doc.field(r, cim)?);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let line = doc.rows.last().map_or(1, |r| r.0);
        return Err(Error::Parse { line, message: format!("pair label {} missing", missing + 1) });
    }
    Ok(m)
}

pub fn read_tmatrix(text: &str) -> Result<TMatrixTable> {
    let doc = Document::parse(text)?;
    doc.meta.expect_kind("tmatrix")?;
    let basis = basis_from(&doc.meta)?;
    let energy: f64 = doc.meta.parse("energy_ry")?;
    let tag: StepTag = doc.meta.parse("step")?;
    let entries = read_entries(&doc, &basis, "")?;
    Ok(TMatrixTable { entries, basis, energy, tag })
}

pub fn corrected_csv(c: &CorrectedTable, extra: &Metadata) -> String {
    let mut meta = table_meta("corrected", &c.table);
    let h = c.steps.steps();
    meta.insert("h1", num(h[0]))
        .insert("h2", num(h[1]))
        .insert("h3", num(h[2]))
        .insert("unit", num(c.steps.unit()))
        .insert("exponent", c.model.exponent);
    for (k, v) in extra.entries() {
        meta.insert(k, v);
    }
    let t = &c.table;
    let n = t.dim();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut r = pair_cells(t, i, j);
            for z in [
                c.sources[0].entries[(i, j)],
                c.sources[1].entries[(i, j)],
                c.sources[2].entries[(i, j)],
                t.entries[(i, j)],
                c.model.a[(i, j)],
                c.model.b[(i, j)],
            ] {
                r.extend([num(z.re), num(z.im)]);
            }
            r.push(num(t.entries[(i, j)].norm()));
            rows.push(r);
        }
    }
    render(
        &meta,
        &[
            "P", "n", "n_prime", "t1_re", "t1_im", "t2_re", "t2_im", "t3_re", "t3_im", "tstar_re", "tstar_im", "a_re",
            "a_im", "b_re", "b_im", "tstar_modulus",
        ],
        &rows,
    )
}

pub fn read_corrected(text: &str) -> Result<CorrectedTable> {
    let doc = Document::parse(text)?;
    doc.meta.expect_kind("corrected")?;
    let basis = basis_from(&doc.meta)?;
    let energy: f64 = doc.meta.parse("energy_ry")?;
    let steps = StepTriple::new(
        [doc.meta.parse("h1")?, doc.meta.parse("h2")?, doc.meta.parse("h3")?],
        doc.meta.parse("unit")?,
    )
    .map_err(|e| Error::Parse { line: doc.meta.line_of("h1"), message: e.to_string() })?;
    let exponent: i32 = doc.meta.parse("exponent")?;
    let table = |prefix: &str, tag: StepTag| -> Result<TMatrixTable> {
        Ok(TMatrixTable { entries: read_entries(&doc, &basis, prefix)?, basis: basis.clone(), energy, tag })
    };
    let h = steps.steps();
    Ok(CorrectedTable {
        table: table("tstar_", StepTag::Corrected)?,
        model: ErrorModel {
            exponent,
            unit: steps.unit(),
            a: read_entries(&doc, &basis, "a_")?,
            b: read_entries(&doc, &basis, "b_")?,
        },
        steps,
        sources: [table("t1_", StepTag::Raw(h[0]))?, table("t2_", StepTag::Raw(h[1]))?, table("t3_", StepTag::Raw(h[2]))?],
    })
}

pub fn sdcs_csv(c: &SdcsCurve, extra: &Metadata) -> String {
    let mut meta = Metadata::new();
    meta.insert("kind", "sdcs")
        .insert("symmetry", c.symmetry)
        .insert("energy_ry", num(c.energy))
        .insert("step", c.tag)
        .insert("kappa", num(c.kappa))
        .insert("units", "pi a0^2 / Ry");
    for (k, v) in extra.entries() {
        meta.insert(k, v);
    }
    let rows: Vec<Vec<String>> =
        c.samples.iter().map(|&(f, v)| vec![num(f), num(f * c.energy), num(v)]).collect();
    render(&meta, &["fraction", "energy_ry", "value"], &rows)
}

pub fn read_sdcs(text: &str) -> Result<SdcsCurve> {
    let doc = Document::parse(text)?;
    doc.meta.expect_kind("sdcs")?;
    let cf = doc.column("fraction")?;
    let cv = doc.column("value")?;
    let samples = (0..doc.rows.len())
        .map(|r| Ok((doc.field(r, cf)?, doc.field(r, cv)?)))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    for (r, w) in samples.windows(2).enumerate() {
        if !(w[1].0 > w[0].0) {
            return Err(Error::Parse { line: doc.rows[r + 1].0, message: "fractions must be strictly increasing".into() });
        }
    }
    Ok(SdcsCurve {
        samples,
        symmetry: doc.meta.parse("symmetry")?,
        energy: doc.meta.parse("energy_ry")?,
        tag: doc.meta.parse("step")?,
        kappa: doc.meta.parse("kappa")?,
    })
}

pub fn amplitudes_csv(c: &AmplitudeVector, basis: &ChannelBasis, tag: StepTag, extra: &Metadata) -> String {
    let mut meta = Metadata::new();
    meta.insert("kind", "amplitudes")
        .insert("symmetry", c.symmetry)
        .insert("energy_ry", num(c.energy))
        .insert("step", tag)
        .insert("degrees", degrees_string(basis));
    for (k, v) in extra.entries() {
        meta.insert(k, v);
    }
    let rows: Vec<Vec<String>> = c
        .values
        .iter()
        .zip(basis.degrees())
        .map(|(z, d)| vec![d.to_string(), num(z.re), num(z.im), num(z.norm())])
        .collect();
    render(&meta, &["n", "re", "im", "modulus"], &rows)
}

pub fn coupling_csv(a: &CouplingMatrix) -> String {
    let mut meta = Metadata::new();
    meta.insert("kind", "coupling")
        .insert("symmetry", a.basis().symmetry())
        .insert("momentum", num(a.momentum()))
        .insert("degrees", degrees_string(a.basis()));
    let v = a.values();
    let d = a.basis().degrees();
    let mut rows = Vec::new();
    for i in 0..v.nrows() {
        for j in 0..v.ncols() {
            rows.push(vec![d[i].to_string(), d[j].to_string(), num(v[(i, j)])]);
        }
    }
    render(&meta, &["n", "n_prime", "value"], &rows)
}

const COEFF_NAMES: [&str; 7] = ["a", "b", "c", "d", "e", "f", "g"];

pub fn fit_report_csv(r: &FitReport, extra: &Metadata) -> String {
    let mut meta = Metadata::new();
    meta.insert("kind", "fit");
    for (k, v) in extra.entries() {
        meta.insert(k, v);
    }
    let coeffs = r.model.coefficients();
    let mut row = vec![r.model.name()];
    row.extend((0..COEFF_NAMES.len()).map(|k| coeffs.get(k).map_or(String::new(), |c| num(*c))));
    row.push(num(r.residual_norm));
    row.push(r.points_used.to_string());
    row.push(r.trimmed.iter().map(usize::to_string).collect::<Vec<_>>().join(" "));
    row.push(r.kink_identified.to_string());
    let mut header = vec!["model"];
    header.extend(COEFF_NAMES);
    header.extend(["residual_norm", "points_used", "trimmed", "kink_identified"]);
    render(&meta, &header, &[row])
}

pub fn read_fit_model(text: &str) -> Result<FitModel> {
    let doc = Document::parse(text)?;
    doc.meta.expect_kind("fit")?;
    if doc.rows.len() != 1 {
        return Err(Error::Parse { line: doc.rows.get(1).map_or(1, |r| r.0), message: "expected one model row".into() });
    }
    let line = doc.rows[0].0;
    let name = &doc.rows[0].1[doc.column("model")?];
    let mut coeffs = Vec::new();
    for n in COEFF_NAMES {
        let c = doc.column(n)?;
        if doc.rows[0].1.get(c).is_none_or(|s| s.is_empty()) {
            break;
        }
        coeffs.push(doc.field::<f64>(0, c)?);
    }
    match name.as_str() {
        "linlin" if coeffs.len() == 4 => Ok(FitModel::LinLin { a: coeffs[0], b: coeffs[1], c: coeffs[2], d: coeffs[3] }),
        m if m.starts_with("poly") && !coeffs.is_empty() => Ok(FitModel::Poly { coeffs }),
        m => Err(Error::Parse { line, message: format!("model '{m}' with {} coefficients", coeffs.len()) }),
    }
}

/// Data, model values and trim flags on one grid, for plotting.
pub fn fit_curve_csv(x: &[f64], y: &[f64], r: &FitReport, extra: &Metadata) -> String {
    let mut meta = Metadata::new();
    meta.insert("kind", "fit_curve").insert("model", r.model.name());
    for (k, v) in extra.entries() {
        meta.insert(k, v);
    }
    let rows: Vec<Vec<String>> = x
        .iter()
        .zip(y)
        .enumerate()
        .map(|(i, (&x, &y))| {
            vec![num(x), num(y), num(r.model.eval(x)), (r.trimmed.binary_search(&i).is_ok() as u8).to_string()]
        })
        .collect();
    render(&meta, &["x", "data", "model", "trimmed"], &rows)
}

/// Two numeric columns `x, y` (first two columns, any names).
pub fn read_points(text: &str) -> Result<Vec<(f64, f64)>> {
    let doc = Document::parse(text)?;
    if doc.header.len() < 2 {
        return Err(Error::Parse { line: 1, message: "expected at least two columns".into() });
    }
    (0..doc.rows.len()).map(|r| Ok((doc.field(r, 0)?, doc.field(r, 1)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extrapolation::correct_table;
    use crate::fitting::{fit_poly, DataSet};
    use crate::observables::{sdcs_curve, tmatrix_table};

    fn table(h: f64, shift: f64) -> TMatrixTable {
        let basis = ChannelBasis::default_for(Symmetry::Triplet);
        let c = AmplitudeVector {
            values: (0..6).map(|k| Complex64::new(0.1 * k as f64 + shift, -0.07 * k as f64 + 1e-3)).collect(),
            symmetry: Symmetry::Triplet,
            energy: 2.0,
        };
        tmatrix_table(&c, &basis, StepTag::Raw(h)).unwrap()
    }

    #[test]
    fn tmatrix_round_trip_is_exact() {
        let t = table(0.009, 1.0 / 3.0);
        let text = tmatrix_csv(&t, &Metadata::new());
        assert!(text.starts_with("# kind = tmatrix\n"));
        assert_eq!(read_tmatrix(&text).unwrap(), t);
    }

    #[test]
    fn corrected_round_trip() {
        let steps = StepTriple::standard();
        let tables = [table(0.0075, 0.3), table(0.009, 0.3 + 1e-7), table(0.01, 0.3 + 3e-7)];
        let c = correct_table(&tables, &steps, 8).unwrap();
        let back = read_corrected(&corrected_csv(&c, &Metadata::new())).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn sdcs_and_fit_round_trip() {
        let curve = sdcs_curve(&table(0.01, 0.2), 80, 1.0).unwrap();
        let back = read_sdcs(&sdcs_csv(&curve, &Metadata::new())).unwrap();
        assert_eq!(back, curve);
        let data = DataSet::from_curve(&curve, crate::fitting::Axis::Energy).unwrap();
        let r = fit_poly(&data, 4).unwrap();
        assert_eq!(read_fit_model(&fit_report_csv(&r, &Metadata::new())).unwrap(), r.model);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = tmatrix_csv(&table(0.01, 0.2), &Metadata::new());
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        // 5 metadata lines, header on line 6, so data row 3 is line 9
        lines[8] = lines[8].replace(',', ";");
        let err = read_tmatrix(&lines.join("\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 9, .. }), "{err}");

        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        lines[10] = "5,0,0,zz,1,1".into();
        let err = read_tmatrix(&lines.join("\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 11, .. }), "{err}");

        let truncated: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_tmatrix(&truncated), Err(Error::Parse { .. })));
        assert!(matches!(read_sdcs(&text), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn plain_points() {
        let pts = read_points("# source = test\nx,y\n0.1,2\n0.2,3\n").unwrap();
        assert_eq!(pts, vec![(0.1, 2.0), (0.2, 3.0)]);
        assert!(matches!(read_points("x,y\n0.1,abc\n"), Err(Error::Parse { line: 2, .. })));
    }
}
