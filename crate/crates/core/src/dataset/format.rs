//! Little-endian binary container for labelled IQ frames or EPS tensors.
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `EPSF`                  |
//! | 4      | 4    | version (u32, = 1)            |
//! | 8      | 8    | sample_rate_hz (f64)          |
//! | 16     | 4    | frame_len (u32)               |
//! | 20     | 4    | record_count (u32)            |
//! | 24     | 1    | payload_kind (0 = iq, 1 = eps)|
//!
//! Each record: device_id (u16), day (u8), location (u8), channel_kind (u8),
//! then `2·frame_len` f32 values. IQ payloads interleave I₀,Q₀,I₁,Q₁,…; EPS
//! payloads hold the I row then the Q row, `frame_len` bins each.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::eps::EpsTensor;
use crate::error::{Error, Result};
use crate::sim::{DomainLabel, IQFrame};
use crate::Scalar;

pub const MAGIC: [u8; 4] = *b"EPSF";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 25;
pub const RECORD_HEADER_BYTES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    Iq,
    Eps,
}

impl PayloadKind {
    fn as_u8(self) -> u8 {
        match self {
            PayloadKind::Iq => 0,
            PayloadKind::Eps => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetHeader {
    pub version: u32,
    pub sample_rate_hz: f64,
    /// Samples per IQ frame, or bins per EPS row.
    pub frame_len: u32,
    pub record_count: u32,
    pub payload_kind: PayloadKind,
}

impl DatasetHeader {
    pub fn new(
        payload_kind: PayloadKind,
        sample_rate_hz: f64,
        frame_len: usize,
        record_count: usize,
    ) -> Result<Self> {
        let h = DatasetHeader {
            version: VERSION,
            sample_rate_hz,
            frame_len: u32::try_from(frame_len)
                .map_err(|_| Error::validation("frame length exceeds u32"))?,
            record_count: u32::try_from(record_count)
                .map_err(|_| Error::validation("record count exceeds u32"))?,
            payload_kind,
        };
        h.validate()?;
        Ok(h)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::validation("sample rate must be positive and finite"));
        }
        if self.frame_len == 0 {
            return Err(Error::validation("frame length must be positive"));
        }
        Ok(())
    }

    /// f32 values per record payload.
    pub fn payload_values(&self) -> usize {
        2 * self.frame_len as usize
    }

    pub fn record_bytes(&self) -> u64 {
        (RECORD_HEADER_BYTES + 4 * self.payload_values()) as u64
    }

    pub fn file_bytes(&self) -> u64 {
        HEADER_BYTES as u64 + self.record_count as u64 * self.record_bytes()
    }

    pub fn to_bytes(&self) -> [u8; HEADER_BYTES] {
        let mut b = [0u8; HEADER_BYTES];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..8].copy_from_slice(&self.version.to_le_bytes());
        b[8..16].copy_from_slice(&self.sample_rate_hz.to_le_bytes());
        b[16..20].copy_from_slice(&self.frame_len.to_le_bytes());
        b[20..24].copy_from_slice(&self.record_count.to_le_bytes());
        b[24] = self.payload_kind.as_u8();
        b
    }

    pub fn from_bytes(b: &[u8; HEADER_BYTES]) -> Result<Self> {
        if b[0..4] != MAGIC {
            return Err(Error::parse(
                0,
                format!("bad magic {:?}, expected \"EPSF\"", &b[0..4]),
            ));
        }
        let version = u32::from_le_bytes(b[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::parse(
                4,
                format!("unsupported version {version}, expected {VERSION}"),
            ));
        }
        let sample_rate_hz = f64::from_le_bytes(b[8..16].try_into().unwrap());
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::parse(
                8,
                format!("sample rate {sample_rate_hz} is not positive"),
            ));
        }
        let frame_len = u32::from_le_bytes(b[16..20].try_into().unwrap());
        if frame_len == 0 {
            return Err(Error::parse(16, "frame length is zero"));
        }
        let record_count = u32::from_le_bytes(b[20..24].try_into().unwrap());
        let payload_kind = match b[24] {
            0 => PayloadKind::Iq,
            1 => PayloadKind::Eps,
            k => return Err(Error::parse(24, format!("unknown payload kind {k}"))),
        };
        Ok(DatasetHeader {
            version,
            sample_rate_hz,
            frame_len,
            record_count,
            payload_kind,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub device_id: u16,
    pub domain: DomainLabel,
    pub payload: Vec<f32>,
}

impl Record {
    pub fn from_frame(f: &IQFrame) -> Result<Self> {
        let (device_id, domain) = labels(f.device_id, f.domain)?;
        let payload = f
            .samples
            .iter()
            .flat_map(|c| [c.re as f32, c.im as f32])
            .collect();
        Ok(Record {
            device_id,
            domain,
            payload,
        })
    }

    pub fn from_eps<T: Scalar>(e: &EpsTensor<T>) -> Result<Self> {
        let (device_id, domain) = labels(e.source_device, e.source_domain)?;
        let payload = e
            .eps_i
            .iter()
            .chain(&e.eps_q)
            .map(|v| v.f64() as f32)
            .collect();
        Ok(Record {
            device_id,
            domain,
            payload,
        })
    }

    pub fn to_frame(&self, sample_rate_hz: f64) -> Result<IQFrame> {
        let samples = self
            .payload
            .chunks_exact(2)
            .map(|p| Complex::new(p[0] as f64, p[1] as f64))
            .collect();
        Ok(IQFrame::new(samples, sample_rate_hz)?
            .with_labels(Some(self.device_id), Some(self.domain)))
    }

    /// EPS rows back from an `eps` record; `resolution_hz` comes from the
    /// caller since the header stores the capture rate.
    pub fn to_eps<T: Scalar>(&self, resolution_hz: f64) -> EpsTensor<T> {
        let n = self.payload.len() / 2;
        let c = |r: &[f32]| r.iter().map(|&v| T::of(v as f64)).collect();
        EpsTensor {
            eps_i: c(&self.payload[..n]),
            eps_q: c(&self.payload[n..]),
            resolution_hz,
            source_device: Some(self.device_id),
            source_domain: Some(self.domain),
        }
    }
}

fn labels(id: Option<u16>, dom: Option<DomainLabel>) -> Result<(u16, DomainLabel)> {
    match (id, dom) {
        (Some(i), Some(d)) => Ok((i, d)),
        _ => Err(Error::validation(
            "stored records need a device id and a domain label",
        )),
    }
}

/// Streams records after writing the header; refuses to finish unless exactly
/// `record_count` records were written.
pub struct DatasetWriter<W: Write> {
    inner: W,
    header: DatasetHeader,
    written: u32,
}

impl<W: Write> DatasetWriter<W> {
    pub fn new(mut inner: W, header: DatasetHeader) -> Result<Self> {
        header.validate()?;
        inner.write_all(&header.to_bytes())?;
        Ok(DatasetWriter {
            inner,
            header,
            written: 0,
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn write(&mut self, r: &Record) -> Result<()> {
        if self.written == self.header.record_count {
            return Err(Error::validation(format!(
                "header declares {} records; refusing to write more",
                self.header.record_count
            )));
        }
        if r.payload.len() != self.header.payload_values() {
            return Err(Error::validation(format!(
                "record payload has {} values, header expects {}",
                r.payload.len(),
                self.header.payload_values()
            )));
        }
        let mut buf = Vec::with_capacity(self.header.record_bytes() as usize);
        buf.extend_from_slice(&r.device_id.to_le_bytes());
        buf.extend_from_slice(&r.domain.to_bytes());
        for v in &r.payload {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.inner.write_all(&buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.record_count {
            return Err(Error::validation(format!(
                "wrote {} records but header declares {}",
                self.written, self.header.record_count
            )));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streams records from a reader positioned at the start of a dataset.
pub struct DatasetReader<R: Read> {
    inner: R,
    header: DatasetHeader,
    next: u32,
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: u64, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::parse(offset, format!("file truncated inside {what}")),
        _ => Error::Io(e),
    })
}

impl<R: Read> DatasetReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut hb = [0u8; HEADER_BYTES];
        read_exact_at(&mut inner, &mut hb, 0, "the header")?;
        let header = DatasetHeader::from_bytes(&hb)?;
        Ok(DatasetReader {
            inner,
            header,
            next: 0,
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    fn offset_of(&self, i: u32) -> u64 {
        HEADER_BYTES as u64 + i as u64 * self.header.record_bytes()
    }

    fn read_record(&mut self) -> Result<Record> {
        let off = self.offset_of(self.next);
        let mut rh = [0u8; RECORD_HEADER_BYTES];
        read_exact_at(
            &mut self.inner,
            &mut rh,
            off,
            &format!("record {} header", self.next),
        )?;
        let device_id = u16::from_le_bytes([rh[0], rh[1]]);
        let domain = DomainLabel::from_bytes([rh[2], rh[3], rh[4]])
            .ok_or_else(|| Error::parse(off + 4, format!("unknown channel kind {}", rh[4])))?;
        let mut raw = vec![0u8; 4 * self.header.payload_values()];
        read_exact_at(
            &mut self.inner,
            &mut raw,
            off + RECORD_HEADER_BYTES as u64,
            &format!("record {} payload", self.next),
        )?;
        let payload = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        self.next += 1;
        Ok(Record {
            device_id,
            domain,
            payload,
        })
    }

    /// Errors if bytes remain after the declared records.
    pub fn expect_end(mut self) -> Result<()> {
        let end = self.offset_of(self.header.record_count);
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(Error::parse(
                end,
                "trailing bytes after the declared records",
            )),
        }
    }
}

impl<R: Read> Iterator for DatasetReader<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.header.record_count {
            return None;
        }
        let r = self.read_record();
        if r.is_err() {
            self.next = self.header.record_count;
        }
        Some(r)
    }
}

pub fn write_dataset(path: &Path, header: &DatasetHeader, records: &[Record]) -> Result<()> {
    if records.len() != header.record_count as usize {
        return Err(Error::validation(format!(
            "{} records supplied but header declares {}",
            records.len(),
            header.record_count
        )));
    }
    let mut w = DatasetWriter::new(BufWriter::new(File::create(path)?), *header)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()?;
    Ok(())
}

/// Open a dataset file for streaming, checking its length against the header.
pub fn open_dataset(path: &Path) -> Result<DatasetReader<BufReader<File>>> {
    let file = File::open(path)?;
    let len = file.metadata()?.len();
    let reader = DatasetReader::new(BufReader::new(file))?;
    let want = reader.header().file_bytes();
    if len != want {
        return Err(Error::parse(
            len.min(want),
            format!(
                "file is {len} bytes but header declares {} records totalling {want} bytes",
                reader.header().record_count
            ),
        ));
    }
    Ok(reader)
}

pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<Record>)> {
    let mut reader = open_dataset(path)?;
    let header = *reader.header();
    let records = reader.by_ref().collect::<Result<Vec<_>>>()?;
    reader.expect_end()?;
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ChannelKind;
    use proptest::prelude::*;

    fn dom() -> DomainLabel {
        DomainLabel::new(1, 2, ChannelKind::Wireless)
    }

    fn rec(id: u16, n: usize, seed: f32) -> Record {
        Record {
            device_id: id,
            domain: dom(),
            payload: (0..2 * n).map(|i| seed + i as f32 * 0.25).collect(),
        }
    }

    #[test]
    fn empty_dataset_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.epsf");
        let h = DatasetHeader::new(PayloadKind::Iq, 20e6, 25_170, 0).unwrap();
        write_dataset(&p, &h, &[]).unwrap();
        let (h2, r) = read_dataset(&p).unwrap();
        assert_eq!(h2, h);
        assert!(r.is_empty());
        assert_eq!(std::fs::metadata(&p).unwrap().len(), HEADER_BYTES as u64);
    }

    #[test]
    fn single_iq_record_file_size() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.epsf");
        let h = DatasetHeader::new(PayloadKind::Iq, 20e6, 25_170, 1).unwrap();
        write_dataset(&p, &h, &[rec(3, 25_170, 0.5)]).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 25 + 5 + 25_170 * 8);
    }

    #[test]
    fn corrupt_magic_fails_at_offset_zero() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.epsf");
        let h = DatasetHeader::new(PayloadKind::Eps, 20e6, 8, 1).unwrap();
        write_dataset(&p, &h, &[rec(0, 8, 1.0)]).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[1] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(
            read_dataset(&p),
            Err(Error::Parse { offset: 0, .. })
        ));
    }

    #[test]
    fn count_and_length_disagreement_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.epsf");
        let h = DatasetHeader::new(PayloadKind::Eps, 20e6, 8, 2).unwrap();
        write_dataset(&p, &h, &[rec(0, 8, 1.0), rec(1, 8, 2.0)]).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        match read_dataset(&p) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, bytes.len() as u64 - 3),
            other => panic!("{other:?}"),
        }
        let mut longer = bytes.clone();
        longer.push(0);
        std::fs::write(&p, &longer).unwrap();
        assert!(matches!(read_dataset(&p), Err(Error::Parse { .. })));
        // A streaming reader on truncated bytes names the record offset.
        let mut r = DatasetReader::new(&bytes[..bytes.len() - 3]).unwrap();
        assert!(r.next().unwrap().is_ok());
        match r.next().unwrap() {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 25 + 69 + 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_version_and_kind_name_offsets() {
        let h = DatasetHeader::new(PayloadKind::Iq, 1.0, 4, 0).unwrap();
        let mut b = h.to_bytes();
        b[4] = 2;
        assert!(matches!(
            DatasetHeader::from_bytes(&b),
            Err(Error::Parse { offset: 4, .. })
        ));
        let mut b = h.to_bytes();
        b[24] = 9;
        assert!(matches!(
            DatasetHeader::from_bytes(&b),
            Err(Error::Parse { offset: 24, .. })
        ));
    }

    #[test]
    fn writer_enforces_declared_shape() {
        let h = DatasetHeader::new(PayloadKind::Eps, 1.0, 4, 1).unwrap();
        let mut w = DatasetWriter::new(Vec::new(), h).unwrap();
        assert!(w.write(&rec(0, 5, 0.0)).is_err());
        w.write(&rec(0, 4, 0.0)).unwrap();
        assert!(w.write(&rec(0, 4, 0.0)).is_err());
        w.finish().unwrap();
        let w = DatasetWriter::new(Vec::new(), h).unwrap();
        assert!(w.finish().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn write_read_write_is_bit_identical(
            vals in prop::collection::vec(any::<f32>(), 1..5usize).prop_map(|v| v),
            ids in prop::collection::vec(any::<u16>(), 0..4),
            day in any::<u8>(),
            eps in any::<bool>(),
        ) {
            let n = vals.len();
            let kind = if eps { PayloadKind::Eps } else { PayloadKind::Iq };
            let records: Vec<Record> = ids.iter().map(|&id| Record {
                device_id: id,
                domain: DomainLabel::new(day, 3, ChannelKind::Wired),
                payload: vals.iter().chain(&vals).copied().collect(),
            }).collect();
            let h = DatasetHeader::new(kind, 20e6, n, records.len()).unwrap();
            let mut w = DatasetWriter::new(Vec::new(), h).unwrap();
            for r in &records { w.write(r).unwrap(); }
            let bytes = w.finish().unwrap();
            let reader = DatasetReader::new(bytes.as_slice()).unwrap();
            let h2 = *reader.header();
            let back: Vec<Record> = reader.collect::<Result<_>>().unwrap();
            let mut w2 = DatasetWriter::new(Vec::new(), h2).unwrap();
            for r in &back { w2.write(r).unwrap(); }
            prop_assert_eq!(w2.finish().unwrap(), bytes);
        }
    }

    #[test]
    fn frame_and_eps_conversions() {
        let f = IQFrame::new(vec![Complex::new(0.5, -0.25), Complex::new(1.0, 2.0)], 20e6)
            .unwrap()
            .with_labels(Some(4), Some(dom()));
        let r = Record::from_frame(&f).unwrap();
        assert_eq!(r.payload, vec![0.5, -0.25, 1.0, 2.0]);
        assert_eq!(r.to_frame(20e6).unwrap(), f);
        let e = EpsTensor::<f64> {
            eps_i: vec![0.25, 0.75],
            eps_q: vec![0.5, 0.5],
            resolution_hz: 10.0,
            source_device: Some(4),
            source_domain: Some(dom()),
        };
        assert_eq!(Record::from_eps(&e).unwrap().to_eps::<f64>(10.0), e);
    }
}
