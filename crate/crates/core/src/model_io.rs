//! BESN model files.
//!
//! Little-endian throughout; reals are f64.
//!
//! ```text
//! "BESN"  u16 version
//! config: u32 n_units (total)  f64 spectral_radius  f64 input_scaling
//!         f64 leak_rate  f64 density  f64 bias_scale  f64 noise_level
//!         u32 washout  u64 seed  u8 direction (0 uni, 1 bi)
//!         u8 aggregation (0 final, 1 mean, 2 mean_plus_final)
//!         u8 shared_weights  u8 wrist_center  f64 lambda
//! classes: u32 C, then C x (u32 byte length, UTF-8 bytes)
//! normalization: u32 F, F x f64 mean, F x f64 std
//! w_out: u32 rows (C), u32 cols (F + 1), row-major f64
//! reservoir: u64 seed, u32 units per direction, u32 input_dim
//! ```
//!
//! Reservoir weights are not stored; they are regenerated from the seed.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::bidirectional::AggregationMode;
use crate::error::{Error, Result};
use crate::pipeline::{Direction, PipelineConfig, TrainedModel};
use crate::readout::ReadoutModel;
use crate::reservoir::ReservoirConfig;

pub const MODEL_MAGIC: &[u8; 4] = b"BESN";
pub const MODEL_VERSION: u16 = 1;

pub fn encode_model(model: &TrainedModel) -> Vec<u8> {
    let mut w = Vec::new();
    let cfg = &model.pipeline;
    let r = &cfg.reservoir;
    let readout = &model.readout;

    w.extend_from_slice(MODEL_MAGIC);
    w.extend_from_slice(&MODEL_VERSION.to_le_bytes());

    put_u32(&mut w, r.n_units as u32);
    for v in [
        r.spectral_radius,
        r.input_scaling,
        r.leak_rate,
        r.density,
        r.bias_scale,
        r.noise_level,
    ] {
        put_f64(&mut w, v);
    }
    put_u32(&mut w, r.washout as u32);
    w.extend_from_slice(&r.seed.to_le_bytes());
    w.push(match cfg.direction {
        Direction::Uni => 0,
        Direction::Bi => 1,
    });
    w.push(cfg.aggregation.code());
    w.push(cfg.shared_weights as u8);
    w.push(cfg.wrist_center as u8);
    put_f64(&mut w, readout.lambda);

    put_u32(&mut w, readout.classes.len() as u32);
    for c in &readout.classes {
        put_u32(&mut w, c.len() as u32);
        w.extend_from_slice(c.as_bytes());
    }

    put_u32(&mut w, readout.n_features() as u32);
    readout.feature_mean.iter().for_each(|&v| put_f64(&mut w, v));
    readout.feature_std.iter().for_each(|&v| put_f64(&mut w, v));

    put_u32(&mut w, readout.w_out.nrows() as u32);
    put_u32(&mut w, readout.w_out.ncols() as u32);
    readout.w_out.iter().for_each(|&v| put_f64(&mut w, v));

    w.extend_from_slice(&r.seed.to_le_bytes());
    put_u32(&mut w, cfg.units_per_direction() as u32);
    put_u32(&mut w, model.input_dim as u32);
    w
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(w: &mut Vec<u8>, v: f64) {
    w.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated {
                path: self.path.to_owned(),
                detail: format!("ended while reading {what} at byte {}", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| self.malformed(format!("{what} length overflows")))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn malformed(&self, detail: impl Into<String>) -> Error {
        Error::Malformed {
            path: self.path.to_owned(),
            detail: detail.into(),
        }
    }
}

pub fn decode_model(bytes: &[u8], path: &Path) -> Result<TrainedModel> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4, "magic")? != MODEL_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_owned(),
            expected: "BESN",
        });
    }
    let version = r.u16("version")?;
    if version != MODEL_VERSION {
        return Err(Error::Version {
            path: path.to_owned(),
            found: version.to_string(),
            expected: MODEL_VERSION.to_string(),
        });
    }

    let n_units = r.u32("n_units")? as usize;
    let spectral_radius = r.f64("spectral_radius")?;
    let input_scaling = r.f64("input_scaling")?;
    let leak_rate = r.f64("leak_rate")?;
    let density = r.f64("density")?;
    let bias_scale = r.f64("bias_scale")?;
    let noise_level = r.f64("noise_level")?;
    let washout = r.u32("washout")? as usize;
    let seed = r.u64("seed")?;
    let direction = match r.u8("direction")? {
        0 => Direction::Uni,
        1 => Direction::Bi,
        other => return Err(r.malformed(format!("direction code {other}"))),
    };
    let agg_code = r.u8("aggregation")?;
    let aggregation = AggregationMode::from_code(agg_code)
        .ok_or_else(|| r.malformed(format!("aggregation code {agg_code}")))?;
    let shared_weights = r.u8("shared_weights")? != 0;
    let wrist_center = r.u8("wrist_center")? != 0;
    let lambda = r.f64("lambda")?;

    let n_classes = r.u32("class count")? as usize;
    let mut classes = Vec::with_capacity(n_classes.min(1 << 16));
    for _ in 0..n_classes {
        let len = r.u32("class name length")? as usize;
        let raw = r.take(len, "class name")?;
        let name = std::str::from_utf8(raw).map_err(|_| r.malformed("class name is not UTF-8"))?;
        classes.push(name.to_owned());
    }

    let f = r.u32("feature count")? as usize;
    let mean = r.f64s(f, "feature_mean")?;
    let std = r.f64s(f, "feature_std")?;

    let rows = r.u32("w_out rows")? as usize;
    let cols = r.u32("w_out cols")? as usize;
    if rows != n_classes || cols != f + 1 {
        return Err(r.malformed(format!(
            "w_out is {rows}x{cols}, expected {n_classes}x{}",
            f + 1
        )));
    }
    let w_out = r.f64s(rows * cols, "w_out")?;

    let tail_seed = r.u64("reservoir seed")?;
    let units_per_direction = r.u32("units per direction")? as usize;
    let input_dim = r.u32("input_dim")? as usize;
    if r.pos != bytes.len() {
        return Err(r.malformed(format!("{} trailing byte(s)", bytes.len() - r.pos)));
    }

    let pipeline = PipelineConfig {
        reservoir: ReservoirConfig {
            n_units,
            spectral_radius,
            input_scaling,
            leak_rate,
            density,
            bias_scale,
            noise_level,
            washout,
            seed,
        },
        direction,
        aggregation,
        shared_weights,
        wrist_center,
    };
    if tail_seed != seed || units_per_direction != pipeline.units_per_direction() {
        return Err(r.malformed("reservoir block disagrees with config block"));
    }
    Ok(TrainedModel {
        pipeline,
        input_dim,
        readout: ReadoutModel {
            w_out: Array2::from_shape_vec((rows, cols), w_out).expect("sized"),
            classes,
            feature_mean: Array1::from(mean),
            feature_std: Array1::from(std),
            lambda,
        },
    })
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_owned())
        } else {
            Error::io(path, e)
        }
    })?;
    decode_model(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample_model() -> TrainedModel {
        TrainedModel {
            pipeline: PipelineConfig {
                reservoir: ReservoirConfig {
                    n_units: 4,
                    seed: 99,
                    washout: 2,
                    ..Default::default()
                },
                direction: Direction::Bi,
                aggregation: AggregationMode::Mean,
                shared_weights: false,
                wrist_center: true,
            },
            input_dim: 3,
            readout: ReadoutModel {
                w_out: array![[0.1, 0.2, 0.3, 0.4, 0.5], [-1.0, -2.0, -3.0, -4.0, -5.0]],
                classes: vec!["hello".into(), "wörld".into()],
                feature_mean: array![0.0, 1.0, 2.0, 3.0],
                feature_std: array![1.0, 1.5, 2.0, 2.5],
                lambda: 1e-3,
            },
        }
    }

    #[test]
    fn roundtrip() {
        let m = sample_model();
        let bytes = encode_model(&m);
        assert_eq!(&bytes[..4], b"BESN");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(decode_model(&bytes, Path::new("m")).unwrap(), m);
    }

    #[test]
    fn rejects_bad_input() {
        let bytes = encode_model(&sample_model());
        let p = Path::new("m");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_model(&bad, p), Err(Error::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode_model(&bad, p), Err(Error::Version { .. })));
        assert!(matches!(
            decode_model(&bytes[..bytes.len() - 3], p),
            Err(Error::Truncated { .. })
        ));
        let mut bad = bytes.clone();
        bad.push(0);
        assert!(matches!(decode_model(&bad, p), Err(Error::Malformed { .. })));
    }
}
