//! Text formats: CSV output, absorption tables, codebook and trace exports.

use std::fmt::Write as _;
use std::path::Path;

use thz_umimo::beamforming::{Codebook, HierarchicalCodebook};
use thz_umimo::irs::{BeamLabel, IrsSlot};
use thz_umimo::propagation::AbsorptionTable;
use thz_umimo::training::TestSlot;

use crate::error::CliError;

/// 12 significant digits in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

/// In-memory CSV document; every document starts with its header.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self {
            text,
            width: header.len(),
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        debug_assert_eq!(fields.len(), self.width, "row width differs from header");
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            self.text.push_str(f.as_ref());
        }
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Parses a two-column `frequency_hz, k_db` table; `#` starts a comment line.
pub fn parse_absorption_table(path: &Path, text: &str) -> Result<AbsorptionTable, CliError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| CliError::Schema(format!("{}:{}:1: {msg}", path.display(), i + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(bad("expected `frequency_hz, k_db`"));
        }
        let f: f64 = fields[0].parse().map_err(|_| bad("frequency is not a number"))?;
        let k: f64 = fields[1].parse().map_err(|_| bad("k_db is not a number"))?;
        points.push((f, k));
    }
    AbsorptionTable::new(points).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn weight_header(n: usize, prefix: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    for i in 0..n {
        h.push(format!("re_{i}"));
        h.push(format!("im_{i}"));
    }
    h
}

fn push_weights(row: &mut Vec<String>, cb: &Codebook, i: usize) {
    for z in cb.get(i).weights().iter() {
        row.push(num(z.re));
        row.push(num(z.im));
    }
}

/// One codeword per line as `re,im` pairs.
pub fn export_codebook(cb: &Codebook) -> String {
    let header = weight_header(cb.n_antennas(), &[]);
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&refs);
    for i in 0..cb.len() {
        let mut row = Vec::new();
        push_weights(&mut row, cb, i);
        csv.row(&row);
    }
    csv.into_string()
}

/// Tree codebook: `stage,index` followed by the `re,im` pairs.
pub fn export_tree(tree: &HierarchicalCodebook) -> String {
    let header = weight_header(tree.n_antennas(), &["stage", "index"]);
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&refs);
    for s in 1..=tree.depth() {
        let cb = tree.stage(s);
        for i in 0..cb.len() {
            let mut row = vec![s.to_string(), i.to_string()];
            push_weights(&mut row, cb, i);
            csv.row(&row);
        }
    }
    csv.into_string()
}

fn beam_index(b: Option<usize>) -> String {
    b.map_or_else(|| "omni".to_string(), |i| i.to_string())
}

/// `stage,tx_index,rx_index,power`, one row per reading.
pub fn training_trace(trace: &[TestSlot]) -> String {
    let mut csv = Csv::new(&["stage", "tx_index", "rx_index", "power"]);
    for slot in trace {
        for r in &slot.readings {
            csv.row(&[slot.stage.to_string(), beam_index(r.tx), beam_index(r.rx), num(r.power)]);
        }
    }
    csv.into_string()
}

fn beam_label(b: BeamLabel) -> String {
    match b {
        BeamLabel::Omni => "omni".into(),
        BeamLabel::Beam { stage, index } => format!("{stage}:{index}"),
    }
}

/// `phase,slot,irs_codeword,tx_beam,rx_beam,power`; beams are `omni` or
/// `stage:index`, a switched-off IRS is `off`.
pub fn irs_trace(trace: &[IrsSlot]) -> String {
    let mut csv = Csv::new(&["phase", "slot", "irs_codeword", "tx_beam", "rx_beam", "power"]);
    for s in trace {
        let mut cw = String::new();
        match s.irs_codeword {
            Some(k) => write!(cw, "{k}").expect("string write"),
            None => cw.push_str("off"),
        }
        csv.row(&[
            s.phase.to_string(),
            s.slot.to_string(),
            cw,
            beam_label(s.tx_beam),
            beam_label(s.rx_beam),
            num(s.power),
        ]);
    }
    csv.into_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use thz_umimo::beamforming::{hierarchical_codebook, steering_codebook};

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(1.0), "1.00000000000e0");
        assert_eq!(num(-0.000123456789012345), "-1.23456789012e-4");
    }

    #[test]
    fn csv_header_first() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&["1", "2"]);
        assert_eq!(c.into_string(), "a,b\n1,2\n");
    }

    #[test]
    fn absorption_table_file() {
        let text = "# window centers\n0.14e12, -42.2\n\n0.35e12,-27.8\n";
        let t = parse_absorption_table(Path::new("t.txt"), text).unwrap();
        assert_eq!(t.points(), &[(0.14e12, -42.2), (0.35e12, -27.8)]);
        let err = parse_absorption_table(Path::new("t.txt"), "1e11, 2\n2e11 3\n").unwrap_err();
        assert!(err.to_string().starts_with("t.txt:2:"), "{err}");
        assert!(parse_absorption_table(Path::new("t.txt"), "2e11, 1\n1e11, 1\n").is_err());
    }

    #[test]
    fn codebook_round_trip() {
        let cb = steering_codebook(4, 4).unwrap();
        let text = export_codebook(&cb);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        for (i, line) in lines[1..].iter().enumerate() {
            let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            for (k, z) in cb.get(i).weights().iter().enumerate() {
                assert!((v[2 * k] - z.re).abs() < 1e-11 && (v[2 * k + 1] - z.im).abs() < 1e-11);
            }
        }
        let tree = hierarchical_codebook(9, 3, 2).unwrap();
        let t = export_tree(&tree);
        assert_eq!(t.lines().count(), 1 + 3 + 9);
        assert!(t.lines().nth(4).unwrap().starts_with("2,0,"));
    }
}
