//! Analytic figure data. Every table here is seed-independent.

use std::fmt;
use std::str::FromStr;

use racovert_core::analytics::{invert_pd_for_k, pc_elisha, pc_kerasures, pc_kerrors, pd_elisha};

use crate::output::{log10, sci, Table};
use crate::CliError;

pub const IDENTITY_BITS: usize = 40;
pub const M_VALUES: [usize; 5] = [4, 8, 16, 24, 32];
pub const PD_TARGETS: [f64; 3] = [0.01, 0.1, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Collision probability of K-errors and K-erasures against K.
    PcKer,
    /// Disruption rate against K for several codebook sizes.
    MPb,
    /// Collision/disruption trade-off traced by K.
    PcPb,
    /// Achievable collision probability per codebook size at fixed
    /// disruption targets.
    MPc,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::PcKer, Figure::MPb, Figure::PcPb, Figure::MPc];

    pub fn name(self) -> &'static str {
        match self {
            Figure::PcKer => "pc-ker",
            Figure::MPb => "m-pb",
            Figure::PcPb => "pc-pb",
            Figure::MPc => "m-pc",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown figure `{s}` (expected pc-ker, m-pb, pc-pb or m-pc)")))
    }
}

pub fn figure_table(fig: Figure) -> Result<Table, CliError> {
    match fig {
        Figure::PcKer => pc_ker(),
        Figure::MPb => m_pb(),
        Figure::PcPb => pc_pb(),
        Figure::MPc => Ok(m_pc()),
    }
}

fn pc_ker() -> Result<Table, CliError> {
    let mut t = Table::new(&["k", "pc_kerrors", "log10_pc_kerrors", "pc_kerasures", "log10_pc_kerasures"]);
    for k in 0..=IDENTITY_BITS {
        let e = pc_kerrors(IDENTITY_BITS, k)?.p_c;
        let a = pc_kerasures(IDENTITY_BITS, k)?.p_c;
        t.push(vec![k.to_string(), sci(e), log10(e), sci(a), log10(a)]);
    }
    Ok(t)
}

fn m_pb() -> Result<Table, CliError> {
    let mut header = vec!["k".to_string()];
    header.extend(M_VALUES.iter().map(|m| format!("pd_m{m}")));
    let mut t = Table { header, rows: Vec::new() };
    for k in 0..=IDENTITY_BITS {
        let mut row = vec![k.to_string()];
        for m in M_VALUES {
            row.push(sci(pd_elisha(IDENTITY_BITS, k, m)?.p_d));
        }
        t.push(row);
    }
    Ok(t)
}

fn pc_pb() -> Result<Table, CliError> {
    let mut t = Table::new(&["m", "k", "p_c", "log10_p_c", "p_d"]);
    for m in M_VALUES {
        for k in 0..=IDENTITY_BITS {
            let pc = pc_elisha(IDENTITY_BITS, k)?.p_c;
            let pd = pd_elisha(IDENTITY_BITS, k, m)?.p_d;
            t.push(vec![m.to_string(), k.to_string(), sci(pc), log10(pc), sci(pd)]);
        }
    }
    Ok(t)
}

fn m_pc() -> Table {
    let mut header = vec!["m".to_string()];
    for pd in PD_TARGETS {
        header.push(format!("k_at_pd_{pd}"));
        header.push(format!("pc_at_pd_{pd}"));
        header.push(format!("log10_pc_at_pd_{pd}"));
    }
    header.extend(["pc_reduced_n".to_string(), "log10_pc_reduced_n".to_string()]);
    let mut t = Table { header, rows: Vec::new() };
    let l = IDENTITY_BITS as u32;
    for m in 1..=l {
        let mut row = vec![m.to_string()];
        for pd in PD_TARGETS {
            match invert_pd_for_k(l, m, pd) {
                Some(k) => {
                    // Closed form 2^(K-L) at the real-valued K.
                    let pc = (k - l as f64).exp2();
                    row.extend([format!("{k}"), sci(pc), log10(pc)]);
                }
                None => row.extend([String::new(), String::new(), String::new()]),
            }
        }
        let base = (-(m as f64)).exp2();
        row.extend([sci(base), log10(base)]);
        t.push(row);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(t: &Table, name: &str) -> usize {
        t.header.iter().position(|h| h == name).unwrap()
    }

    #[test]
    fn pc_ker_k20() {
        let t = figure_table(Figure::PcKer).unwrap();
        assert_eq!(t.rows.len(), 41);
        let v: f64 = t.rows[20][col(&t, "pc_kerrors")].parse().unwrap();
        assert!((v - 0.1254).abs() < 5e-5);
        let a: f64 = t.rows[40][col(&t, "pc_kerasures")].parse().unwrap();
        assert_eq!(a, 1.0);
    }

    #[test]
    fn m_pb_zero_k_row() {
        let t = figure_table(Figure::MPb).unwrap();
        assert!(t.rows[0][1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0));
        assert!(t.rows[40][1..].iter().all(|v| v.parse::<f64>().unwrap() == 1.0));
    }

    #[test]
    fn m_pc_single_byte_reading() {
        let t = figure_table(Figure::MPc).unwrap();
        let row = &t.rows[7];
        assert_eq!(row[0], "8");
        let lg: f64 = row[col(&t, "log10_pc_at_pd_0.5")].parse().unwrap();
        assert!((lg - -5.0).abs() <= 0.5, "{lg}");
        let base: f64 = row[col(&t, "pc_reduced_n")].parse().unwrap();
        assert_eq!(base, 2f64.powi(-8));
    }

    #[test]
    fn pc_pb_is_long_format() {
        let t = figure_table(Figure::PcPb).unwrap();
        assert_eq!(t.rows.len(), 5 * 41);
        assert!("m-zz".parse::<Figure>().is_err());
    }
}
