//! FCIDUMP reader and writer.
//!
//! Header: a `&FCI ... ` namelist closed by `&END` or `/`, possibly over
//! several lines. Records: `value i j k l`, 1-based, chemists' notation (pq|rs).
//! Four nonzero indices give an ERI, `i j 0 0` a one-body element,
//! `0 0 0 0` the core energy. `i 0 0 0` (orbital energies) are skipped.
//! Blank lines and lines starting with `#` or `!` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numeric::SymMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct FcidumpData {
    pub norb: usize,
    pub nelec: usize,
    pub ms2: i64,
    pub e_core: f64,
    pub h: SymMatrix,
    /// Dense g_pqrs, index p + n(q + n(r + n·s)), 8-fold symmetric.
    pub eri: Vec<f64>,
}

impl FcidumpData {
    pub fn zeros(norb: usize, nelec: usize) -> Self {
        FcidumpData { norb, nelec, ms2: 0, e_core: 0.0, h: SymMatrix::zeros(norb), eri: vec![0.0; norb.pow(4)] }
    }

    #[inline]
    pub fn idx(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        let n = self.norb;
        p + n * (q + n * (r + n * s))
    }

    #[inline]
    pub fn g(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.eri[self.idx(p, q, r, s)]
    }

    /// Sets (pq|rs) and its seven symmetry partners.
    pub fn set_eri(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        for (a, b, c, d) in [
            (p, q, r, s),
            (q, p, r, s),
            (p, q, s, r),
            (q, p, s, r),
            (r, s, p, q),
            (s, r, p, q),
            (r, s, q, p),
            (s, r, q, p),
        ] {
            let i = self.idx(a, b, c, d);
            self.eri[i] = v;
        }
    }
}

fn header_value(tokens: &[(String, Vec<String>)], key: &str) -> Option<String> {
    tokens.iter().find(|(k, _)| k == key).and_then(|(_, v)| v.first().cloned())
}

fn parse_float(tok: &str, line: usize) -> Result<f64> {
    tok.replace(['D', 'd'], "E")
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("cannot parse value '{tok}'")))
}

pub fn parse_fcidump(path: impl AsRef<Path>) -> Result<FcidumpData> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    parse_fcidump_str(&text)
}

pub fn parse_fcidump_str(text: &str) -> Result<FcidumpData> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() && is_skippable(lines[i]) {
        i += 1;
    }
    if i == lines.len() || !lines[i].trim_start().to_ascii_uppercase().starts_with("&FCI") {
        return Err(Error::parse(i + 1, "expected '&FCI' namelist header"));
    }
    let header_line = i + 1;
    let mut header = String::new();
    let mut closed = false;
    while i < lines.len() {
        let upper = lines[i].to_ascii_uppercase();
        let trimmed = upper.trim();
        if let Some(pos) = trimmed.find("&END") {
            header.push_str(&trimmed[..pos]);
            closed = true;
        } else if trimmed == "/" || trimmed.ends_with('/') {
            header.push_str(trimmed.trim_end_matches('/'));
            closed = true;
        } else {
            header.push_str(trimmed);
            header.push(',');
        }
        i += 1;
        if closed {
            break;
        }
    }
    if !closed {
        return Err(Error::parse(header_line, "namelist header is not terminated"));
    }
    let body = header.trim_start().trim_start_matches("&FCI");
    let mut tokens: Vec<(String, Vec<String>)> = Vec::new();
    for tok in body.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((k, v)) = tok.split_once('=') {
            tokens.push((k.trim().to_string(), vec![v.trim().to_string()]));
        } else if let Some(last) = tokens.last_mut() {
            last.1.push(tok.to_string());
        } else {
            return Err(Error::parse(header_line, format!("unexpected header token '{tok}'")));
        }
    }
    let get_usize = |key: &str| -> Result<usize> {
        header_value(&tokens, key)
            .ok_or_else(|| Error::parse(header_line, format!("missing {key}")))?
            .parse::<usize>()
            .map_err(|_| Error::parse(header_line, format!("{key} is not a nonnegative integer")))
    };
    let norb = get_usize("NORB")?;
    let nelec = get_usize("NELEC")?;
    if norb == 0 {
        return Err(Error::parse(header_line, "NORB must be positive"));
    }
    let ms2 = match header_value(&tokens, "MS2") {
        Some(v) => v.parse::<i64>().map_err(|_| Error::parse(header_line, "MS2 is not an integer"))?,
        None => 0,
    };

    let mut data = FcidumpData::zeros(norb, nelec);
    data.ms2 = ms2;
    let mut h = DMatrix::zeros(norb, norb);
    for (off, raw) in lines[i..].iter().enumerate() {
        let lineno = i + off + 1;
        if is_skippable(raw) {
            continue;
        }
        let f: Vec<&str> = raw.split_whitespace().collect();
        if f.len() != 5 {
            return Err(Error::parse(lineno, format!("expected 5 fields, found {}", f.len())));
        }
        let v = parse_float(f[0], lineno)?;
        let mut ix = [0usize; 4];
        for (slot, tok) in ix.iter_mut().zip(&f[1..]) {
            let k: usize = tok.parse().map_err(|_| Error::parse(lineno, format!("bad index '{tok}'")))?;
            if k > norb {
                return Err(Error::parse(lineno, format!("index {k} exceeds NORB={norb}")));
            }
            *slot = k;
        }
        match ix {
            [0, 0, 0, 0] => data.e_core = v,
            [p, q, 0, 0] if p > 0 && q > 0 => {
                h[(p - 1, q - 1)] = v;
                h[(q - 1, p - 1)] = v;
            }
            [_, 0, 0, 0] => {}
            [p, q, r, s] if p > 0 && q > 0 && r > 0 && s > 0 => data.set_eri(p - 1, q - 1, r - 1, s - 1, v),
            _ => return Err(Error::parse(lineno, format!("unsupported index pattern {ix:?}"))),
        }
    }
    data.h = SymMatrix::new(h)?;
    Ok(data)
}

fn is_skippable(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#') || t.starts_with('!')
}

/// Serializes unique nonzero integrals; parse(write(d)) == d.
pub fn write_fcidump_string(d: &FcidumpData) -> String {
    let n = d.norb;
    let mut out = String::new();
    let _ = writeln!(out, " &FCI NORB={},NELEC={},MS2={},", n, d.nelec, d.ms2);
    let _ = writeln!(out, " &END");
    for p in 0..n {
        for q in 0..=p {
            for r in 0..n {
                for s in 0..=r {
                    if p * n + q < r * n + s {
                        continue;
                    }
                    let v = d.g(p, q, r, s);
                    if v != 0.0 {
                        let _ = writeln!(out, "{:e} {} {} {} {}", v, p + 1, q + 1, r + 1, s + 1);
                    }
                }
            }
        }
    }
    for p in 0..n {
        for q in 0..=p {
            let v = d.h.matrix()[(p, q)];
            if v != 0.0 {
                let _ = writeln!(out, "{:e} {} {} 0 0", v, p + 1, q + 1);
            }
        }
    }
    let _ = writeln!(out, "{:e} 0 0 0 0", d.e_core);
    out
}

pub fn write_fcidump(d: &FcidumpData, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), write_fcidump_string(d)).map_err(|e| Error::io(path.as_ref(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_energy_only() {
        let d = parse_fcidump_str("&FCI NORB=2,NELEC=2,MS2=0,\n&END\n0.5 0 0 0 0\n").unwrap();
        assert_eq!(d.e_core, 0.5);
        assert_eq!(d.h, SymMatrix::zeros(2));
        assert!(d.eri.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn multiline_header_with_slash_and_symmetry_expansion() {
        let text = "&FCI NORB=3,\n NELEC=2, MS2=0,\n ORBSYM=1,1,1,\n ISYM=1\n/\n0.25 1 2 3 3\n-1.0D0 2 1 0 0\n";
        let d = parse_fcidump_str(text).unwrap();
        assert_eq!((d.norb, d.nelec), (3, 2));
        for (p, q, r, s) in [(0, 1, 2, 2), (1, 0, 2, 2), (2, 2, 0, 1), (2, 2, 1, 0)] {
            assert_eq!(d.g(p, q, r, s), 0.25);
        }
        assert_eq!(d.h.matrix()[(0, 1)], -1.0);
        assert_eq!(d.h.matrix()[(1, 0)], -1.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(parse_fcidump_str("0.5 0 0 0 0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_fcidump_str("&FCI NORB=2\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_fcidump_str("&FCI NELEC=2\n&END\n"), Err(Error::Parse { line: 1, .. })));
        let e = parse_fcidump_str("&FCI NORB=2,NELEC=2\n&END\n\n1.0 3 1 0 0\n").unwrap_err();
        assert_eq!(e, Error::Parse { line: 4, msg: "index 3 exceeds NORB=2".into() });
    }

    #[test]
    fn round_trip_is_identity() {
        let mut d = FcidumpData::zeros(3, 2);
        d.e_core = 0.7142857142857143;
        d.set_eri(0, 1, 2, 0, 0.1 + 0.2);
        d.set_eri(2, 2, 2, 2, 0.6499084759690261);
        d.h = SymMatrix::new(DMatrix::from_fn(3, 3, |i, j| (i + j) as f64 / 7.0)).unwrap();
        let back = parse_fcidump_str(&write_fcidump_string(&d)).unwrap();
        assert_eq!(back, d);
    }
}
