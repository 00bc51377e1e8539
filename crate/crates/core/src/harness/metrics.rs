use std::collections::BTreeMap;
use std::time::Duration;

use crate::counters::OpCounts;
use crate::party::{PartyId, UserId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PartyMetrics {
    pub ops: OpCounts,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub messages_sent: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoundTiming {
    pub round: u8,
    pub server: Duration,
    /// Slowest user step in the round.
    pub user_max: Duration,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunMetrics {
    pub parties: BTreeMap<PartyId, PartyMetrics>,
    pub rounds: Vec<RoundTiming>,
    /// Bytes sent to parties that were no longer active.
    pub bytes_undelivered: u64,
    /// Injected channel latency accumulated over the run.
    pub virtual_latency: Duration,
    pub wall: Duration,
}

impl RunMetrics {
    pub fn server(&self) -> PartyMetrics {
        self.parties.get(&PartyId::Server).copied().unwrap_or_default()
    }

    pub fn user(&self, u: UserId) -> PartyMetrics {
        self.parties.get(&PartyId::User(u)).copied().unwrap_or_default()
    }

    pub fn users(&self) -> impl Iterator<Item = (UserId, PartyMetrics)> + '_ {
        self.parties.iter().filter_map(|(p, m)| p.user().map(|u| (u, *m)))
    }

    pub fn party_mut(&mut self, p: PartyId) -> &mut PartyMetrics {
        self.parties.entry(p).or_default()
    }

    pub fn total_bytes_sent(&self) -> u64 {
        self.parties.values().map(|m| m.bytes_sent).sum()
    }

    pub fn total_bytes_received(&self) -> u64 {
        self.parties.values().map(|m| m.bytes_received).sum()
    }

    /// Everything except wall-clock fields, for determinism checks.
    pub fn counters(&self) -> (BTreeMap<PartyId, PartyMetrics>, u64, Duration) {
        (self.parties.clone(), self.bytes_undelivered, self.virtual_latency)
    }

    /// Adds another run's counters, e.g. a preparation phase.
    pub fn absorb(&mut self, other: &RunMetrics) {
        for (p, m) in &other.parties {
            let e = self.party_mut(*p);
            e.ops += m.ops;
            e.bytes_sent += m.bytes_sent;
            e.bytes_received += m.bytes_received;
            e.messages_sent += m.messages_sent;
        }
        self.bytes_undelivered += other.bytes_undelivered;
        self.virtual_latency += other.virtual_latency;
        self.wall += other.wall;
        self.rounds.extend(other.rounds.iter().copied());
    }
}

/// Ordinary least squares for `y = a + b x1 + c x2`, returning the
/// coefficients and R^2.
pub fn fit_linear2(rows: &[(f64, f64, f64)]) -> Option<([f64; 3], f64)> {
    if rows.len() < 3 {
        return None;
    }
    // Normal equations X^T X beta = X^T y.
    let mut xtx = [[0f64; 3]; 3];
    let mut xty = [0f64; 3];
    for &(x1, x2, y) in rows {
        let v = [1.0, x1, x2];
        for i in 0..3 {
            for j in 0..3 {
                xtx[i][j] += v[i] * v[j];
            }
            xty[i] += v[i] * y;
        }
    }
    let beta = solve3(xtx, xty)?;
    let mean = rows.iter().map(|r| r.2).sum::<f64>() / rows.len() as f64;
    let ss_tot: f64 = rows.iter().map(|r| (r.2 - mean).powi(2)).sum();
    let ss_res: f64 = rows.iter().map(|&(x1, x2, y)| (y - beta[0] - beta[1] * x1 - beta[2] * x2).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some((beta, r2))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..3 {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..3 {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some([b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_plane_fits_perfectly() {
        let rows: Vec<(f64, f64, f64)> = [(1.0, 2.0), (3.0, 1.0), (5.0, 7.0), (2.0, 9.0)]
            .iter()
            .map(|&(m, n)| (m, n, 4.0 + 2.0 * m + 0.5 * n))
            .collect();
        let (beta, r2) = fit_linear2(&rows).unwrap();
        assert!((beta[0] - 4.0).abs() < 1e-9 && (beta[1] - 2.0).abs() < 1e-9 && (beta[2] - 0.5).abs() < 1e-9);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_design_has_no_fit() {
        let rows = vec![(1.0, 1.0, 2.0), (2.0, 2.0, 3.0), (3.0, 3.0, 4.0)];
        assert!(fit_linear2(&rows).is_none());
    }
}
