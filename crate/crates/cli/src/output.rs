//! Summary documents and CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Ordered dotted-key document, rendered one `key = value` per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        self.set(key, fmt_f64(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Reads a rendered summary back.
    pub fn parse(text: &str) -> Self {
        let mut out = Self::new();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                out.entries.push((k.to_string(), v.to_string()));
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.render())
    }
}

/// Writes a CSV with one header row and floats at 17 significant digits.
pub fn write_csv<const W: usize>(path: &Path, header: &[&str; W], rows: impl IntoIterator<Item = [f64; W]>) -> std::io::Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    fs::write(path, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn summary_renders_and_parses() {
        let mut s = Summary::new();
        s.set("command", "flow");
        s.num("flow.residual", 1e-7);
        s.set("command", "verify");
        let back = Summary::parse(&s.render());
        assert_eq!(back, s);
        assert_eq!(back.get("command"), Some("verify"));
    }
}
