//! Binary model checkpoints.
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `EPSC` |
//! | 4 | 4 | version (u32 LE, 1) |
//! | 8 | 8 | n_classes (u64) |
//! | 16 | 8 | input_rows (u64) |
//! | 24 | 8 | input_width (u64) |
//! | 32 | 48 | six block channel counts (u64 each) |
//! | 80 | 8 | first kernel width (u64) |
//! | 88 | 8 | kernel width (u64) |
//! | 96 | 16 | two hidden dense widths (u64 each) |
//! | 112 | 40 | leaky slope, input scale, bn eps, bn momentum (f64) then a reserved f64 |
//! | 152 | … | tensors |
//!
//! Each tensor is a u64 element count followed by that many f64 LE values,
//! in the order: for each block, conv weight, gamma, beta, running mean,
//! running variance; then for each dense layer, weight and bias.

use std::io::{Read, Write};
use std::path::Path;

use super::arch::{CnnConfig, CONV_BLOCKS};
use super::model::{Cnn, ConvBlock, Dense};
use crate::error::{Error, Result};
use crate::Scalar;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"EPSC";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<T: Scalar, W: Write>(model: &Cnn<T>, mut w: W) -> Result<()> {
    let c = &model.config;
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let ints = [c.n_classes, c.input_rows, c.input_width]
        .into_iter()
        .chain(c.channels.iter().copied())
        .chain([
            c.first_kernel_width,
            c.kernel_width,
            c.fc_hidden[0],
            c.fc_hidden[1],
        ]);
    for v in ints {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for v in [c.leaky_slope, c.input_scale, c.bn_eps, c.bn_momentum, 0.0] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut put = |t: &[T]| -> Result<()> {
        w.write_all(&(t.len() as u64).to_le_bytes())?;
        for v in t {
            w.write_all(&v.f64().to_le_bytes())?;
        }
        Ok(())
    };
    for b in &model.blocks {
        for t in [
            &b.weight,
            &b.gamma,
            &b.beta,
            &b.running_mean,
            &b.running_var,
        ] {
            put(t)?;
        }
    }
    for d in &model.dense {
        put(&d.weight)?;
        put(&d.bias)?;
    }
    Ok(())
}

struct Cursor<R> {
    r: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.r
            .read_exact(&mut b)
            .map_err(|_| Error::parse(self.offset, format!("checkpoint truncated in {what}")))?;
        self.offset += N as u64;
        Ok(b)
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(what)?))
    }
    fn usize(&mut self, what: &str) -> Result<usize> {
        let at = self.offset;
        usize::try_from(self.u64(what)?)
            .map_err(|_| Error::parse(at, format!("{what} overflows usize")))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(what)?))
    }
    fn tensor<T: Scalar>(&mut self, name: &str, want: usize) -> Result<Vec<T>> {
        let at = self.offset;
        let n = self.u64(name)?;
        if n != want as u64 {
            return Err(Error::parse(
                at,
                format!("tensor {name} has {n} values, architecture expects {want}"),
            ));
        }
        (0..want).map(|_| self.f64(name).map(T::of)).collect()
    }
}

pub fn read_checkpoint<T: Scalar, R: Read>(r: R) -> Result<Cnn<T>> {
    let mut c = Cursor { r, offset: 0 };
    if c.take::<4>("magic")? != CHECKPOINT_MAGIC {
        return Err(Error::parse(0, "not a checkpoint (bad magic)"));
    }
    let v = u32::from_le_bytes(c.take("version")?);
    if v != CHECKPOINT_VERSION {
        return Err(Error::parse(
            4,
            format!("unsupported checkpoint version {v}"),
        ));
    }
    let n_classes = c.usize("n_classes")?;
    let input_rows = c.usize("input_rows")?;
    let input_width = c.usize("input_width")?;
    let channels = (0..CONV_BLOCKS)
        .map(|_| c.usize("channels"))
        .collect::<Result<Vec<_>>>()?;
    let first_kernel_width = c.usize("first_kernel_width")?;
    let kernel_width = c.usize("kernel_width")?;
    let fc_hidden = [c.usize("fc_hidden")?, c.usize("fc_hidden")?];
    let leaky_slope = c.f64("leaky_slope")?;
    let input_scale = c.f64("input_scale")?;
    let bn_eps = c.f64("bn_eps")?;
    let bn_momentum = c.f64("bn_momentum")?;
    c.f64("reserved")?;
    let config = CnnConfig {
        n_classes,
        input_rows,
        input_width,
        channels,
        first_kernel_width,
        kernel_width,
        fc_hidden,
        leaky_slope,
        input_scale,
        bn_eps,
        bn_momentum,
    };
    config.validate()?;
    let mut blocks = Vec::with_capacity(CONV_BLOCKS);
    for b in 0..CONV_BLOCKS {
        let (cin, k, _) = config.block_geometry(b);
        let co = config.channels[b];
        let p = |s: &str| format!("block{}.{s}", b + 1);
        blocks.push(ConvBlock {
            weight: c.tensor(&p("conv.weight"), co * cin * k)?,
            gamma: c.tensor(&p("bn.gamma"), co)?,
            beta: c.tensor(&p("bn.beta"), co)?,
            running_mean: c.tensor(&p("bn.running_mean"), co)?,
            running_var: c.tensor(&p("bn.running_var"), co)?,
        });
    }
    let mut dense = Vec::new();
    for (j, (i, o)) in config.dense_shapes().into_iter().enumerate() {
        dense.push(Dense {
            weight: c.tensor(&format!("fc{}.weight", j + 1), i * o)?,
            bias: c.tensor(&format!("fc{}.bias", j + 1), o)?,
        });
    }
    let mut extra = [0u8; 1];
    if c.r.read(&mut extra)? != 0 {
        return Err(Error::parse(
            c.offset,
            "trailing bytes after the last tensor",
        ));
    }
    let model = Cnn {
        config,
        blocks,
        dense,
    };
    if !model.is_finite() {
        return Err(Error::validation(
            "checkpoint holds non-finite values or non-positive running variance",
        ));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Scalar>(model: &Cnn<T>, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Cnn<T>> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_identical() {
        let m = Cnn::<f64>::new(CnnConfig::miniature(3).with_input_scale(4096.0), 5).unwrap();
        let mut a = Vec::new();
        write_checkpoint(&m, &mut a).unwrap();
        let back: Cnn<f64> = read_checkpoint(a.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut b = Vec::new();
        write_checkpoint(&back, &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a[..4], b"EPSC");
    }

    #[test]
    fn shape_mismatch_and_truncation_are_rejected() {
        let m = Cnn::<f64>::new(CnnConfig::miniature(2), 5).unwrap();
        let mut a = Vec::new();
        write_checkpoint(&m, &mut a).unwrap();
        // Claim three classes while the stored tensors are for two.
        let mut bad = a.clone();
        bad[8..16].copy_from_slice(&3u64.to_le_bytes());
        let e = read_checkpoint::<f64, _>(bad.as_slice()).unwrap_err();
        assert!(e.to_string().contains("fc3.weight"), "{e}");
        assert!(read_checkpoint::<f64, _>(&a[..a.len() - 3]).is_err());
        let mut long = a.clone();
        long.push(0);
        assert!(read_checkpoint::<f64, _>(long.as_slice()).is_err());
        let mut magic = a;
        magic[0] = b'X';
        assert!(read_checkpoint::<f64, _>(magic.as_slice()).is_err());
    }
}
