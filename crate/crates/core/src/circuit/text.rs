//! Line-oriented circuit text format.
//!
//! ```text
//! # qubits: 4
//! RZZ q2 q3 -2.0000000000000000e-1
//! ---
//! RX q1 5.0000000000000000e-1
//! DENSE2Q q1 q2 <16 entries re,im, row-major>
//! ```
//!
//! Qubit labels are 1-based. Blank lines and other `#` lines are ignored.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::{Circuit, Gate, Mat4};
use crate::error::{Error, Result};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_circuit(c: &Circuit) -> String {
    let mut out = format!("# qubits: {}\n", c.sites());
    for (i, layer) in c.layers().iter().enumerate() {
        if i > 0 {
            out.push_str("---\n");
        }
        for g in layer {
            let s = g.first_site() + 1;
            match g {
                Gate::Rx { angle, .. } | Gate::Rz { angle, .. } => {
                    let _ = writeln!(out, "{} q{s} {}", g.name(), num(*angle));
                }
                Gate::Rzz { angle, .. } => {
                    let _ = writeln!(out, "RZZ q{s} q{} {}", s + 1, num(*angle));
                }
                Gate::Dense2q { matrix, .. } => {
                    let _ = write!(out, "DENSE2Q q{s} q{}", s + 1);
                    for r in 0..4 {
                        for col in 0..4 {
                            let z = matrix[(r, col)];
                            let _ = write!(out, " {},{}", num(z.re), num(z.im));
                        }
                    }
                    out.push('\n');
                }
            }
        }
    }
    out
}

pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let mut sites = None;
    let mut layers: Vec<Vec<Gate>> = vec![Vec::new()];
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(n) = rest.trim().strip_prefix("qubits:") {
                let n = n.trim().parse::<usize>().map_err(|e| err(format!("qubit count: {e}")))?;
                sites = Some(n);
            }
            continue;
        }
        if line == "---" {
            layers.push(Vec::new());
            continue;
        }
        let mut tok = line.split_whitespace();
        let name = tok.next().unwrap_or_default();
        let qubit = |tok: Option<&str>| -> Result<usize> {
            let t = tok.ok_or_else(|| err("missing qubit".into()))?;
            let q = t
                .strip_prefix('q')
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&q| q >= 1)
                .ok_or_else(|| err(format!("bad qubit label `{t}`")))?;
            Ok(q - 1)
        };
        let gate = match name {
            "RX" | "RZ" => {
                let site = qubit(tok.next())?;
                let angle = parse_f64(tok.next(), line_no)?;
                if name == "RX" {
                    Gate::Rx { site, angle }
                } else {
                    Gate::Rz { site, angle }
                }
            }
            "RZZ" | "DENSE2Q" => {
                let site = qubit(tok.next())?;
                let other = qubit(tok.next())?;
                if other != site + 1 {
                    return Err(err("two-qubit gates must act on neighbours q<i> q<i+1>".into()));
                }
                if name == "RZZ" {
                    Gate::Rzz { site, angle: parse_f64(tok.next(), line_no)? }
                } else {
                    let mut m = Mat4::zeros();
                    for k in 0..16 {
                        let entry = tok.next().ok_or_else(|| err(format!("expected 16 entries, got {k}")))?;
                        let (re, im) = entry.split_once(',').ok_or_else(|| err(format!("bad entry `{entry}`")))?;
                        m[(k / 4, k % 4)] = Complex64::new(parse_f64(Some(re), line_no)?, parse_f64(Some(im), line_no)?);
                    }
                    Gate::Dense2q { site, matrix: m }
                }
            }
            other => return Err(err(format!("unknown gate `{other}`"))),
        };
        if let Some(extra) = tok.next() {
            return Err(err(format!("trailing token `{extra}`")));
        }
        layers.last_mut().expect("at least one layer").push(gate);
    }
    let sites = sites.ok_or_else(|| Error::Parse { line: 1, msg: "missing `# qubits:` header".into() })?;
    if layers.len() == 1 && layers[0].is_empty() {
        layers.clear();
    }
    Circuit::from_layers(sites, layers)
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let t = tok.ok_or_else(|| Error::Parse { line, msg: "missing number".into() })?;
    t.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Parse { line, msg: format!("bad number `{t}`") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{kron2, rx, rz, trotter_first_order};
    use crate::model::ModelSpec;

    #[test]
    fn trotter_round_trip_is_exact() {
        let spec = ModelSpec::new(5, 1.0, 3.0).unwrap();
        let c = trotter_first_order(&spec, 0.1).unwrap();
        let text = write_circuit(&c);
        assert!(text.starts_with("# qubits: 5\nRZZ q2 q3 "));
        assert_eq!(parse_circuit(&text).unwrap(), c);
    }

    #[test]
    fn dense_round_trip_and_empty_layers() {
        let m = crate::circuit::rzz(0.3) * kron2(&rx(0.2), &rz(-1.1));
        let c = Circuit::from_layers(3, vec![vec![], vec![Gate::Dense2q { site: 1, matrix: m }], vec![]]).unwrap();
        let back = parse_circuit(&write_circuit(&c)).unwrap();
        assert_eq!(back, c);
        assert_eq!(parse_circuit("# qubits: 2\n").unwrap().depth(), 0);
    }

    #[test]
    fn malformed_input_reports_line() {
        let bad = "# qubits: 3\nRX q1 0.5\nRZZ q1 q3 0.2\n";
        assert!(matches!(parse_circuit(bad), Err(Error::Parse { line: 3, .. })));
        assert!(parse_circuit("RX q1 0.5\n").is_err());
        assert!(parse_circuit("# qubits: 2\nRY q1 0.5\n").is_err());
        assert!(parse_circuit("# qubits: 2\nRX q0 0.5\n").is_err());
        assert!(parse_circuit("# qubits: 2\nRX q1 nan\n").is_err());
        assert!(parse_circuit("# qubits: 2\nRX q3 0.5\n").is_err());
    }
}
