//! Little-endian binary formats for embedding bags and kernels, plus the JSON
//! manifest that accompanies a bag file.
//!
//! Bag file: `"TLSM"`, version `u32`, bag count `u32`, then per bag `rows u32`,
//! `dim u32` and `rows * dim` `f32` values.
//!
//! Kernel file: `"TLKN"`, version `u32`, kind `u8`, nonneg mode `u8`,
//! `n_rows u32`, `n_cols u32`, then the row-major `f32` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{EmbeddingBag, KernelKind, NonnegMode, SimilarityKernel};
use crate::simulator::{Image, RegionLabel, Scenario, ScenarioConfig, Splits};

pub const BAG_MAGIC: [u8; 4] = *b"TLSM";
pub const KERNEL_MAGIC: [u8; 4] = *b"TLKN";
pub const FORMAT_VERSION: u32 = 1;

// Upper bound on speculative preallocation from untrusted headers.
const PREALLOC_CAP: usize = 1 << 20;

fn read_array<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated while reading {what}")),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array::<4, _>(r, what)?))
}

fn read_u8<R: Read>(r: &mut R, what: &str) -> Result<u8> {
    Ok(read_array::<1, _>(r, what)?[0])
}

fn read_f32s<R: Read>(r: &mut R, count: usize, what: &str) -> Result<Vec<f32>> {
    let mut out = Vec::with_capacity(count.min(PREALLOC_CAP));
    let mut chunk = vec![0u8; 4 * 4096];
    let mut left = count;
    while left > 0 {
        let n = left.min(4096);
        let bytes = &mut chunk[..4 * n];
        r.read_exact(bytes).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated while reading {what}")),
            _ => Error::Io(e),
        })?;
        out.extend(
            bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
        );
        left -= n;
    }
    Ok(out)
}

fn check_header<R: Read>(r: &mut R, magic: [u8; 4]) -> Result<()> {
    let got = read_array::<4, _>(r, "magic")?;
    if got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = read_u32(r, "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    Ok(())
}

fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after payload".into())),
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}

pub fn write_bags<W: Write>(w: &mut W, bags: &[&EmbeddingBag]) -> Result<()> {
    w.write_all(&BAG_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&to_u32(bags.len(), "bag count")?.to_le_bytes())?;
    for b in bags {
        w.write_all(&to_u32(b.rows(), "rows")?.to_le_bytes())?;
        w.write_all(&to_u32(b.dim(), "dim")?.to_le_bytes())?;
        for v in b.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_bags<R: Read>(r: &mut R) -> Result<Vec<EmbeddingBag>> {
    check_header(r, BAG_MAGIC)?;
    let count = read_u32(r, "bag count")? as usize;
    let mut bags = Vec::with_capacity(count.min(PREALLOC_CAP));
    for i in 0..count {
        let rows = read_u32(r, "rows")? as usize;
        let dim = read_u32(r, "dim")? as usize;
        let n = rows
            .checked_mul(dim)
            .ok_or_else(|| Error::Format(format!("bag {i} shape overflows")))?;
        let data = read_f32s(r, n, "bag values")?;
        bags.push(EmbeddingBag::new(rows, dim, data).map_err(|e| match e {
            Error::InvalidBag(m) => Error::InvalidBag(format!("bag {i}: {m}")),
            other => other,
        })?);
    }
    expect_eof(r)?;
    Ok(bags)
}

pub fn write_kernel<W: Write>(w: &mut W, k: &SimilarityKernel) -> Result<()> {
    w.write_all(&KERNEL_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[k.kind().code(), k.nonneg_mode().code()])?;
    w.write_all(&to_u32(k.n_rows(), "n_rows")?.to_le_bytes())?;
    w.write_all(&to_u32(k.n_cols(), "n_cols")?.to_le_bytes())?;
    for v in k.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_kernel<R: Read>(r: &mut R) -> Result<SimilarityKernel> {
    check_header(r, KERNEL_MAGIC)?;
    let kind_code = read_u8(r, "kind")?;
    let kind = KernelKind::from_code(kind_code)
        .ok_or_else(|| Error::Format(format!("unknown kernel kind {kind_code}")))?;
    let mode_code = read_u8(r, "nonneg mode")?;
    let mode = NonnegMode::from_code(mode_code)
        .ok_or_else(|| Error::Format(format!("unknown nonneg mode {mode_code}")))?;
    let n_rows = read_u32(r, "n_rows")? as usize;
    let n_cols = read_u32(r, "n_cols")? as usize;
    let n = n_rows
        .checked_mul(n_cols)
        .ok_or_else(|| Error::Format("kernel shape overflows".into()))?;
    let values = read_f32s(r, n, "kernel values")?;
    expect_eof(r)?;
    SimilarityKernel::new(kind, mode, n_rows, n_cols, values)
}

pub fn save_bags(path: &Path, bags: &[&EmbeddingBag]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_bags(&mut w, bags)?;
    w.flush()?;
    Ok(())
}

pub fn load_bags(path: &Path) -> Result<Vec<EmbeddingBag>> {
    read_bags(&mut BufReader::new(File::open(path)?))
}

pub fn save_kernel(path: &Path, kernel: &SimilarityKernel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_kernel(&mut w, kernel)?;
    w.flush()?;
    Ok(())
}

pub fn load_kernel(path: &Path) -> Result<SimilarityKernel> {
    read_kernel(&mut BufReader::new(File::open(path)?))
}

/// One line of the sidecar manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub index: usize,
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<usize>,
    /// Ground truth per region, in bag row order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<RegionLabel>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BagManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroids: Option<Vec<Vec<f32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<Splits>,
    pub bags: Vec<ManifestEntry>,
}

impl BagManifest {
    /// Plain manifest numbering bags `0..n` with ids `"0"`, `"1"`, ...
    pub fn numbered(n: usize) -> Self {
        Self {
            scenario: None,
            centroids: None,
            splits: None,
            bags: (0..n)
                .map(|i| ManifestEntry {
                    index: i,
                    image_id: i.to_string(),
                    attribute: None,
                    labels: None,
                })
                .collect(),
        }
    }
}

pub fn save_manifest(path: &Path, manifest: &BagManifest) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<BagManifest> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub const SCENARIO_BAGS: &str = "images.tlsm";
pub const SCENARIO_MANIFEST: &str = "manifest.json";

/// Writes `images.tlsm` and `manifest.json` into `dir`.
pub fn export_scenario(dir: &Path, scenario: &Scenario, splits: Option<&Splits>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let bags: Vec<&EmbeddingBag> = scenario.images.iter().map(|i| &i.bag).collect();
    save_bags(&dir.join(SCENARIO_BAGS), &bags)?;
    let manifest = BagManifest {
        scenario: Some(scenario.config.clone()),
        centroids: Some(scenario.centroids.clone()),
        splits: splits.cloned(),
        bags: scenario
            .images
            .iter()
            .enumerate()
            .map(|(i, img)| ManifestEntry {
                index: i,
                image_id: format!("img{i:06}"),
                attribute: Some(img.attribute),
                labels: Some(img.labels.clone()),
            })
            .collect(),
    };
    save_manifest(&dir.join(SCENARIO_MANIFEST), &manifest)
}

/// Inverse of [`export_scenario`].
pub fn import_scenario(dir: &Path) -> Result<(Scenario, Option<Splits>)> {
    let bags = load_bags(&dir.join(SCENARIO_BAGS))?;
    let manifest = load_manifest(&dir.join(SCENARIO_MANIFEST))?;
    let missing = |what: &str| Error::Format(format!("scenario manifest lacks {what}"));
    let config = manifest.scenario.ok_or_else(|| missing("scenario"))?;
    let centroids = manifest.centroids.ok_or_else(|| missing("centroids"))?;
    if manifest.bags.len() != bags.len() {
        return Err(Error::Format(format!(
            "manifest lists {} bags, file holds {}",
            manifest.bags.len(),
            bags.len()
        )));
    }
    let mut images: Vec<Option<Image>> = vec![None; bags.len()];
    for (entry, bag) in manifest.bags.into_iter().zip(bags) {
        let labels = entry.labels.ok_or_else(|| missing("labels"))?;
        if labels.len() != bag.rows() {
            return Err(Error::Format(format!(
                "bag {} has {} rows but {} labels",
                entry.index,
                bag.rows(),
                labels.len()
            )));
        }
        let slot = images
            .get_mut(entry.index)
            .ok_or_else(|| Error::Format(format!("manifest index {} out of range", entry.index)))?;
        *slot = Some(Image {
            bag,
            labels,
            attribute: entry.attribute.ok_or_else(|| missing("attribute"))?,
        });
    }
    let images = images
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Format("manifest indices are not a permutation".into()))?;
    Ok((
        Scenario {
            config,
            centroids,
            images,
        },
        manifest.splits,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{build_splits, generate_scenario, SplitConfig};

    fn bag(rows: &[&[f32]]) -> EmbeddingBag {
        EmbeddingBag::from_rows(rows).unwrap()
    }

    #[test]
    fn bags_round_trip() {
        let a = bag(&[&[1.0, -2.5], &[0.125, 3.0]]);
        let b = bag(&[&[f32::MIN_POSITIVE, 7.0]]);
        let mut buf = Vec::new();
        write_bags(&mut buf, &[&a, &b]).unwrap();
        assert_eq!(&buf[..4], b"TLSM");
        assert_eq!(buf.len(), 12 + 2 * 8 + 6 * 4);
        let back = read_bags(&mut buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn kernel_round_trip_bitwise() {
        let k = SimilarityKernel::new(
            KernelKind::QueryByUnlabeled,
            NonnegMode::ShiftRescale,
            2,
            3,
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 1.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_kernel(&mut buf, &k).unwrap();
        assert_eq!(&buf[..4], b"TLKN");
        assert_eq!(buf[8], 0);
        assert_eq!(buf[9], 1);
        let back = read_kernel(&mut buf.as_slice()).unwrap();
        let bits = |k: &SimilarityKernel| k.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&k));
        assert_eq!(back, k);
    }

    #[test]
    fn malformed_inputs_are_errors() {
        assert!(matches!(read_bags(&mut &b"NOPE\x01\0\0\0\0\0\0\0"[..]), Err(Error::Format(_))));
        assert!(matches!(read_bags(&mut &b"TLSM\x02\0\0\0\0\0\0\0"[..]), Err(Error::Format(_))));
        assert!(matches!(read_bags(&mut &b"TLSM\x01\0\0\0\x01\0\0\0"[..]), Err(Error::Format(_))));
        // header promises a huge bag with no payload
        assert!(matches!(
            read_bags(&mut &b"TLSM\x01\0\0\0\x01\0\0\0\xff\xff\xff\xff\xff\xff\xff\xff"[..]),
            Err(Error::Format(_))
        ));
        let mut buf = Vec::new();
        write_bags(&mut buf, &[&bag(&[&[1.0]])]).unwrap();
        buf.push(0);
        assert!(matches!(read_bags(&mut buf.as_slice()), Err(Error::Format(_))));
        let mut k = Vec::new();
        k.extend_from_slice(b"TLKN\x01\0\0\0\x07\0");
        assert!(matches!(read_kernel(&mut k.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn scenario_round_trip() {
        let s = generate_scenario(&crate::simulator::ScenarioConfig {
            n_images: 1500,
            n_rare_slice_images: 70,
            ..Default::default()
        })
        .unwrap();
        let sp = build_splits(&s, &SplitConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_scenario(dir.path(), &s, Some(&sp)).unwrap();
        let (s2, sp2) = import_scenario(dir.path()).unwrap();
        assert_eq!(s2, s);
        assert_eq!(sp2, Some(sp));
    }
}
