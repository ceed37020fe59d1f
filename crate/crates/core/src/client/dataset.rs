//! Sample sources for the streaming client.
//!
//! CSV files carry a header `x1..xD,y1..yK` and optionally a trailing `t`
//! column with explicit timestamps; rows are streamed in file order.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub const TOY_SINE: &str = "toy-sine";

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// `y = sin(2π·x1) + ε`, `x` uniform in `[0, 1]^d_in`, `ε ~ N(0, noise²)`.
    ToySine {
        d_in: usize,
        noise: f64,
        seed: u64,
    },
    Csv(PathBuf),
}

impl Source {
    pub fn toy(d_in: usize, noise: f64, seed: u64) -> Self {
        Source::ToySine { d_in, noise, seed }
    }

    /// `"toy-sine"` or a CSV path.
    pub fn parse(text: &str, d_in: usize, noise: f64, seed: u64) -> Self {
        if text == TOY_SINE {
            Source::toy(d_in, noise, seed)
        } else {
            Source::Csv(PathBuf::from(text))
        }
    }

    pub fn load(&self, count: usize) -> Result<Dataset> {
        match self {
            Source::ToySine { d_in, noise, seed } => toy_sine(count, *d_in, *noise, *seed),
            Source::Csv(path) => {
                let ds = Dataset::from_csv(path)?;
                if ds.len() < count {
                    return Err(Error::InvalidArgument(format!(
                        "{} has {} rows, {count} requested",
                        path.display(),
                        ds.len()
                    )));
                }
                Ok(ds.truncated(count))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub d_in: usize,
    pub d_out: usize,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    /// Explicit timestamps; when absent the streamer stamps with a monotonic clock.
    pub timestamps: Option<Vec<f64>>,
    /// Noise-free targets, known only for synthetic sources.
    pub clean: Option<Vec<Vec<f64>>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn truncated(mut self, n: usize) -> Self {
        self.inputs.truncate(n);
        self.outputs.truncate(n);
        if let Some(ts) = &mut self.timestamps {
            ts.truncate(n);
        }
        if let Some(c) = &mut self.clean {
            c.truncate(n);
        }
        self
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let csv_err = |e: csv::Error| Error::InvalidArgument(e.to_string());
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let d_in = header.iter().take_while(|h| h.starts_with('x')).count();
        let d_out = header[d_in..].iter().take_while(|h| h.starts_with('y')).count();
        let has_t = header.len() == d_in + d_out + 1 && header[d_in + d_out] == "t";
        if d_in == 0 || d_out == 0 || header.len() != d_in + d_out + has_t as usize {
            return Err(Error::InvalidArgument(format!(
                "header must be x1..xD,y1..yK[,t], got {}",
                header.join(",")
            )));
        }
        let mut ds = Dataset {
            d_in,
            d_out,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timestamps: has_t.then(Vec::new),
            clean: None,
        };
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(csv_err)?;
            let values = record
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidArgument(format!("row {}: {e}", row + 1)))?;
            ds.inputs.push(values[..d_in].to_vec());
            ds.outputs.push(values[d_in..d_in + d_out].to_vec());
            if let Some(ts) = &mut ds.timestamps {
                ts.push(values[d_in + d_out]);
            }
        }
        Ok(ds)
    }

    /// Explicit timestamps must be strictly increasing: replies are matched by `t`.
    pub fn check_timestamps(&self) -> Result<()> {
        if let Some(ts) = &self.timestamps {
            if let Some(i) = ts
                .windows(2)
                .position(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
            {
                return Err(Error::InvalidArgument(format!(
                    "timestamps must be strictly increasing; rows {} and {} hold {} and {}",
                    i + 1,
                    i + 2,
                    ts[i],
                    ts[i + 1]
                )));
            }
        }
        Ok(())
    }
}

pub fn toy_sine(count: usize, d_in: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if d_in == 0 {
        return Err(Error::InvalidArgument("toy-sine needs d_in >= 1".into()));
    }
    let normal = Normal::new(0.0, noise).map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(count);
    let mut outputs = Vec::with_capacity(count);
    let mut clean = Vec::with_capacity(count);
    for _ in 0..count {
        let x: Vec<f64> = (0..d_in).map(|_| rng.random::<f64>()).collect();
        let f = (2.0 * std::f64::consts::PI * x[0]).sin();
        inputs.push(x);
        outputs.push(vec![f + normal.sample(&mut rng)]);
        clean.push(vec![f]);
    }
    Ok(Dataset {
        d_in,
        d_out: 1,
        inputs,
        outputs,
        timestamps: None,
        clean: Some(clean),
    })
}
