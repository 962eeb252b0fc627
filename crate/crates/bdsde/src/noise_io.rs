//! CSV dump format for noise bundles.
//!
//! ```text
//! horizon,steps,d,l,outer,inner,seed,generator_id
//! 1,64,1,1,8,512,1,keyed-gaussian
//! stream,outer,inner,step,component,value
//! W,0,0,0,0,-0.0132...
//! B,0,0,0,0,0.0871...
//! ```
//!
//! `W` rows carry `dW[outer][inner][step][component]` and `B` rows
//! `dB[outer][step][component]` (with `inner` fixed at 0). Values use the
//! shortest representation that reads back to the same bits.

use std::fmt::Write as _;
use std::path::Path;

use bdsde_core::noise::{make_grid, NoiseBundle};

use crate::CliError;

const META: &str = "horizon,steps,d,l,outer,inner,seed,generator_id";
const ROWS: &str = "stream,outer,inner,step,component,value";

pub fn to_csv(noise: &NoiseBundle) -> String {
    let g = noise.grid();
    let mut out = format!(
        "{META}\n{},{},{},{},{},{},{},{}\n{ROWS}\n",
        g.horizon(),
        g.steps(),
        noise.d(),
        noise.l(),
        noise.outer(),
        noise.inner(),
        noise.seed(),
        noise.generator_id()
    );
    for o in 0..noise.outer() {
        for j in 0..noise.inner() {
            for i in 0..g.steps() {
                for (k, v) in noise.dw(o, j, i).iter().enumerate() {
                    let _ = writeln!(out, "W,{o},{j},{i},{k},{v}");
                }
            }
        }
    }
    for o in 0..noise.outer() {
        for i in 0..g.steps() {
            for (k, v) in noise.db(o, i).iter().enumerate() {
                let _ = writeln!(out, "B,{o},0,{i},{k},{v}");
            }
        }
    }
    out
}

fn bad(line: usize, what: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("noise file line {line}: {what}"))
}

fn field<T: std::str::FromStr>(s: &str, line: usize, name: &str) -> Result<T, CliError> {
    s.trim().parse().map_err(|_| bad(line, format!("bad {name} `{s}`")))
}

pub fn from_csv(text: &str) -> Result<NoiseBundle, CliError> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (n, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    if header.trim() != META {
        return Err(bad(n, "missing metadata header"));
    }
    let (n, meta) = lines.next().ok_or_else(|| bad(2, "missing metadata"))?;
    let m: Vec<&str> = meta.split(',').collect();
    if m.len() != 8 {
        return Err(bad(n, "metadata needs 8 fields"));
    }
    let horizon: f64 = field(m[0], n, "horizon")?;
    let steps: usize = field(m[1], n, "steps")?;
    let d: usize = field(m[2], n, "d")?;
    let l: usize = field(m[3], n, "l")?;
    let outer: usize = field(m[4], n, "outer")?;
    let inner: usize = field(m[5], n, "inner")?;
    let seed: u64 = field(m[6], n, "seed")?;
    let generator = m[7].trim().to_string();
    let (n, rows) = lines.next().ok_or_else(|| bad(3, "missing row header"))?;
    if rows.trim() != ROWS {
        return Err(bad(n, "missing row header"));
    }

    let mut dw = vec![f64::NAN; outer * inner * steps * d];
    let mut db = vec![f64::NAN; outer * steps * l];
    let mut seen_w = vec![false; dw.len()];
    let mut seen_b = vec![false; db.len()];
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(n, "row needs 6 fields"));
        }
        let o: usize = field(f[1], n, "outer")?;
        let j: usize = field(f[2], n, "inner")?;
        let i: usize = field(f[3], n, "step")?;
        let k: usize = field(f[4], n, "component")?;
        let v: f64 = field(f[5], n, "value")?;
        let (arr, seen, idx) = match f[0].trim() {
            "W" if o < outer && j < inner && i < steps && k < d => {
                (&mut dw, &mut seen_w, ((o * inner + j) * steps + i) * d + k)
            }
            "B" if o < outer && j == 0 && i < steps && k < l => (&mut db, &mut seen_b, (o * steps + i) * l + k),
            _ => return Err(bad(n, "stream or index out of range")),
        };
        if seen[idx] {
            return Err(bad(n, "duplicate entry"));
        }
        seen[idx] = true;
        arr[idx] = v;
    }
    if seen_w.iter().chain(&seen_b).any(|s| !s) {
        return Err(CliError::Config("noise file is missing increments".into()));
    }
    let grid = make_grid(horizon, steps)?;
    Ok(NoiseBundle::from_parts(grid, d, l, outer, inner, seed, generator, dw, db)?)
}

pub fn load(path: &Path) -> Result<NoiseBundle, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    from_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bdsde_core::noise::sample_noise;

    #[test]
    fn round_trip_is_bit_exact() {
        let noise = sample_noise(make_grid(1.0, 5).unwrap(), 2, 1, 2, 3, 7).unwrap();
        let back = from_csv(&to_csv(&noise)).unwrap();
        assert_eq!(back, noise);
        assert_eq!(back.id(), noise.id());
    }

    #[test]
    fn rejects_incomplete_files() {
        let noise = sample_noise(make_grid(1.0, 2).unwrap(), 1, 1, 1, 2, 7).unwrap();
        let text = to_csv(&noise);
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(from_csv(&truncated).is_err());
        assert!(from_csv("nonsense").is_err());
        let dup = format!("{text}W,0,0,0,0,1\n");
        assert!(from_csv(&dup).is_err());
    }
}
