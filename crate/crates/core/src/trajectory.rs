//! Time series of solver states and their on-disk formats.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::linsolve::SolveStats;

/// Uniform time grid `t_n = n dt` with one state vector per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub alpha: f64,
    pub scheme: String,
    /// Linear-solve statistics of each step (one fewer than `states`).
    pub stats: Vec<SolveStats>,
}

impl Trajectory {
    pub fn new(dt: f64, initial: Vec<f64>, alpha: f64, scheme: impl Into<String>) -> Self {
        Self {
            dt,
            times: vec![0.0],
            states: vec![initial],
            alpha,
            scheme: scheme.into(),
            stats: Vec::new(),
        }
    }

    pub fn push(&mut self, state: Vec<f64>, stats: SolveStats) {
        let n = self.states.len();
        self.times.push(n as f64 * self.dt);
        self.states.push(state);
        self.stats.push(stats);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn state_len(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }
}

/// Number of steps covering `[0, t_final]` with step `dt`.
pub fn step_count(dt: f64, t_final: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param("dt", format!("must be > 0, got {dt}")));
    }
    if !(t_final >= dt) || !t_final.is_finite() {
        return Err(Error::param(
            "T",
            format!("must be >= dt = {dt}, got {t_final}"),
        ));
    }
    Ok((t_final / dt - 1e-9).ceil() as usize)
}

const STATE_MAGIC: &[u8] = b"FKSTATE 1\n";

/// Binary dump: `FKSTATE 1\n`, then N and N_T as little-endian u64, then the
/// `N_T + 1` states row-major as little-endian f64.
pub fn write_state_dump(traj: &Trajectory, mut out: impl Write) -> io::Result<()> {
    out.write_all(STATE_MAGIC)?;
    out.write_all(&(traj.state_len() as u64).to_le_bytes())?;
    out.write_all(&(traj.steps() as u64).to_le_bytes())?;
    for s in &traj.states {
        for v in s {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a dump written by [`write_state_dump`]; returns the states.
pub fn read_state_dump(mut input: impl Read) -> Result<Vec<Vec<f64>>> {
    let mut magic = [0u8; 10];
    input.read_exact(&mut magic)?;
    if magic != STATE_MAGIC {
        return Err(Error::param("state", "missing FKSTATE 1 header"));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let nt = u64::from_le_bytes(word) as usize;
    let mut states = Vec::with_capacity(nt + 1);
    for _ in 0..=nt {
        let mut s = Vec::with_capacity(n);
        for _ in 0..n {
            input.read_exact(&mut word)?;
            s.push(f64::from_le_bytes(word));
        }
        states.push(s);
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_count_validates() {
        assert_eq!(step_count(0.05, 40.0).unwrap(), 800);
        assert_eq!(step_count(0.1, 0.25).unwrap(), 3);
        assert!(step_count(0.0, 1.0).is_err());
        assert!(step_count(1.0, 0.5).is_err());
    }

    #[test]
    fn state_dump_round_trip() {
        let mut t = Trajectory::new(0.5, vec![1.0, 2.0], 0.7, "test");
        t.push(vec![3.0, -4.5], SolveStats::default());
        let mut buf = Vec::new();
        write_state_dump(&t, &mut buf).unwrap();
        assert_eq!(buf.len(), 10 + 16 + 4 * 8);
        assert_eq!(read_state_dump(&buf[..]).unwrap(), t.states);
    }
}
