use serde::{Deserialize, Serialize};

use crate::explore::ConfigRecord;
use crate::{Error, Result};

/// `a` dominates `b` when it is no worse in every objective and better in at
/// least one. All objectives are minimized.
pub fn dominates(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Non-dominated flags for a set of objective vectors.
pub fn pareto_flags(points: &[[f64; 3]]) -> Vec<bool> {
    points
        .iter()
        .map(|p| !points.iter().any(|q| dominates(q, p)))
        .collect()
}

/// Sets `pareto` on every record, minimizing error, execution time and ROM.
/// Records without a measured time rank behind every timed record.
pub fn pareto_front(records: &mut [ConfigRecord]) {
    let points: Vec<[f64; 3]> = records.iter().map(ConfigRecord::objectives).collect();
    for (r, flag) in records.iter_mut().zip(pareto_flags(&points)) {
        r.pareto = flag;
    }
}

/// Memory budget of a deployment target; `None` means unlimited.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub name: String,
    pub rom_limit: Option<u64>,
    pub ram_limit: Option<u64>,
}

impl Target {
    pub fn fits(&self, rom: u64, ram: u64) -> bool {
        self.rom_limit.is_none_or(|l| rom <= l) && self.ram_limit.is_none_or(|l| ram <= l)
    }

    /// Parses `name:rom:ram`. Limits are byte counts with an optional `k`,
    /// `M` (powers of 1000) or `Ki`, `Mi` (powers of 1024) suffix; an empty
    /// limit or `-` is unlimited.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let [name, rom, ram] = parts[..] else {
            return Err(Error::Explore(format!(
                "target `{spec}` is not name:rom:ram"
            )));
        };
        if name.is_empty() {
            return Err(Error::Explore(format!("target `{spec}` has no name")));
        }
        Ok(Target {
            name: name.to_string(),
            rom_limit: parse_limit(rom)?,
            ram_limit: parse_limit(ram)?,
        })
    }
}

fn parse_limit(s: &str) -> Result<Option<u64>> {
    let s = s.trim();
    if s.is_empty() || s == "-" {
        return Ok(None);
    }
    let (digits, mult) = [
        ("Ki", 1024u64),
        ("Mi", 1024 * 1024),
        ("k", 1000),
        ("K", 1000),
        ("M", 1_000_000),
    ]
    .iter()
    .find_map(|(suffix, m)| s.strip_suffix(suffix).map(|d| (d, *m)))
    .unwrap_or((s, 1));
    let value: f64 = digits
        .trim()
        .parse()
        .map_err(|_| Error::Explore(format!("invalid memory limit `{s}`")))?;
    if value.is_nan() || value < 0.0 {
        return Err(Error::Explore(format!("invalid memory limit `{s}`")));
    }
    Ok(Some((value * mult as f64).round() as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub targets: Vec<Target>,
    /// `fits[r][t]`: record `r` fits target `t`.
    pub fits: Vec<Vec<bool>>,
}

pub fn feasibility_report(
    records: &[ConfigRecord],
    targets: &[Target],
) -> Result<FeasibilityReport> {
    if targets.is_empty() {
        return Err(Error::Explore(
            "feasibility needs at least one target".into(),
        ));
    }
    let fits = records
        .iter()
        .map(|r| {
            targets
                .iter()
                .map(|t| t.fits(r.rom_bytes, r.ram_bytes))
                .collect()
        })
        .collect();
    Ok(FeasibilityReport {
        targets: targets.to_vec(),
        fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dominating_record() {
        assert_eq!(
            pareto_flags(&[[0.1, 1.0, 10.0], [0.2, 2.0, 20.0]]),
            vec![true, false]
        );
    }

    #[test]
    fn identical_records_all_kept() {
        assert_eq!(pareto_flags(&[[0.1, 1.0, 10.0]; 3]), vec![true; 3]);
    }

    #[test]
    fn target_parsing() {
        let t = Target::parse("tc32x:1M:96k").unwrap();
        assert_eq!(t.rom_limit, Some(1_000_000));
        assert_eq!(t.ram_limit, Some(96_000));
        let t = Target::parse("big::-").unwrap();
        assert!(t.fits(u64::MAX, u64::MAX));
        assert_eq!(Target::parse("x:2Ki:").unwrap().rom_limit, Some(2048));
        assert!(Target::parse("x:1").is_err());
        assert!(Target::parse("x:abc:1").is_err());
    }
}
