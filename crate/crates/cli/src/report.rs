//! Single collector for everything a run writes: summary entries, verdicts and
//! report files. Nothing touches the output directory until [`Report::write`].

use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

#[derive(Debug, Default)]
pub struct Report {
    entries: Vec<(String, String)>,
    verdicts: Vec<(String, bool)>,
    files: Vec<(String, String)>,
}

impl Report {
    pub fn value(&mut self, key: &str, v: impl Display) {
        self.entries.push((key.to_string(), v.to_string()));
    }

    /// Numbers far from unit size are written in exponent form.
    pub fn number(&mut self, key: &str, v: f64) {
        self.value(key, fmt_number(v));
    }

    pub fn verdict(&mut self, key: &str, ok: bool) {
        self.verdicts.push((key.to_string(), ok));
    }

    pub fn file(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|(_, ok)| *ok)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.verdicts.iter().filter(|(_, ok)| !ok).map(|(k, _)| k.as_str()).collect()
    }

    /// `key=value` lines, then one `verdict.<key>=pass|fail` per invariant and an overall `status`.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k}={v}\n"));
        }
        for (k, ok) in &self.verdicts {
            out.push_str(&format!("verdict.{k}={}\n", if *ok { "pass" } else { "fail" }));
        }
        out.push_str(&format!("status={}\n", if self.passed() { "pass" } else { "fail" }));
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("summary"), self.summary())?;
        for (name, body) in &self.files {
            fs::write(dir.join(name), body).with_context(|| format!("writing {name}"))?;
        }
        Ok(())
    }
}

pub fn fmt_number(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e6).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Serialises rows with the `csv` writer.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_lists_verdicts_after_values() {
        let mut r = Report::default();
        r.value("grid.points", 16);
        r.verdict("grid.axioms", true);
        r.verdict("cz.bound", false);
        assert_eq!(r.summary(), "grid.points=16\nverdict.grid.axioms=pass\nverdict.cz.bound=fail\nstatus=fail\n");
        assert_eq!(r.failures(), vec!["cz.bound"]);
    }

    #[test]
    fn small_numbers_use_exponents() {
        assert_eq!(fmt_number(1.1102230246251565e-16), "1.1102230246251565e-16");
        assert_eq!(fmt_number(0.25), "0.25");
        assert_eq!(fmt_number(0.0), "0");
    }

    #[test]
    fn csv_rows_are_quoted_when_needed() {
        let t = csv_table(&["a", "b"], &[vec!["1".into(), "x,y".into()]]).unwrap();
        assert_eq!(t, "a,b\n1,\"x,y\"\n");
    }
}
