use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// A recorded trajectory. States are stored row by row: `xs[i*d..(i+1)*d]`
/// and `ys[i*k..(i+1)*k]` belong to `times[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub d: usize,
    pub k: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub seed: u64,
    pub policy: String,
    pub slow_jumps: u64,
    pub fast_jumps: u64,
}

impl PathSample {
    pub fn new(d: usize, k: usize, seed: u64, policy: String) -> Self {
        Self {
            times: Vec::new(),
            d,
            k,
            xs: Vec::new(),
            ys: Vec::new(),
            seed,
            policy,
            slow_jumps: 0,
            fast_jumps: 0,
        }
    }

    pub fn push(&mut self, t: f64, x: &[f64], y: &[f64]) {
        self.times.push(t);
        self.xs.extend_from_slice(x);
        self.ys.extend_from_slice(y);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.d..(i + 1) * self.d]
    }

    pub fn y(&self, i: usize) -> &[f64] {
        &self.ys[i * self.k..(i + 1) * self.k]
    }

    pub fn last_x(&self) -> &[f64] {
        self.x(self.len() - 1)
    }

    pub fn last_y(&self) -> &[f64] {
        self.y(self.len() - 1)
    }

    /// Columns `t, x_1..x_d, y` (or `y_1..y_k` when `k > 1`).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.d).map(|i| format!("x_{i}")));
        if self.k == 1 {
            header.push("y".into());
        } else {
            header.extend((1..=self.k).map(|i| format!("y_{i}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            write!(w, "{}", self.times[i])?;
            for v in self.x(i).iter().chain(self.y(i)) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut p = PathSample::new(2, 1, 7, "uniform:0.1".into());
        p.push(0.0, &[1.0, 2.0], &[0.0]);
        p.push(0.1, &[1.5, 2.0], &[-0.25]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x_1,x_2,y\n0,1,2,0\n0.1,1.5,2,-0.25\n");
    }
}
