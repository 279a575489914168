//! Binary classifier snapshot.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "AKWS"            magic
//! u32               format version (1)
//! u32 E, u32 C, u32 d
//! u64               expansion seed
//! u8                activation (0 identity, 1 relu)
//! f64               gamma
//! u32               tasks seen
//! u32 count, then count × (u32 class id, u32 column)
//! E × C f64         weights, row-major
//! E × E f64         autocorrelation inverse, row-major
//! ```

use std::path::Path;

use nalgebra::DMatrix;

use crate::afam::Afam;
use crate::classifier::{AnalyticClassifier, ClassRegistry};
use crate::error::{Error, Result};
use crate::expansion::{Activation, ExpansionMap};

pub const MAGIC: &[u8; 4] = b"AKWS";
pub const FORMAT_VERSION: u32 = 1;

/// Classifier state plus the expansion parameters needed to rebuild the
/// feature path in front of it.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub input_dim: usize,
    pub expansion_seed: u64,
    pub activation: Activation,
    pub classifier: AnalyticClassifier,
}

impl Snapshot {
    pub fn new(expansion: &ExpansionMap, classifier: AnalyticClassifier) -> Result<Self> {
        if expansion.expansion_size() != classifier.expansion_size() {
            return Err(Error::Shape(format!(
                "expansion size {} does not match classifier width {}",
                expansion.expansion_size(),
                classifier.expansion_size()
            )));
        }
        Ok(Self {
            input_dim: expansion.dim(),
            expansion_seed: expansion.seed(),
            activation: expansion.activation(),
            classifier,
        })
    }

    pub fn rebuild_expansion(&self) -> Result<ExpansionMap> {
        ExpansionMap::build(
            self.input_dim,
            self.classifier.expansion_size(),
            self.expansion_seed,
            self.activation,
        )
    }

    /// Stored state elements: autocorrelation, weights and registry entries.
    pub fn element_count(&self) -> usize {
        self.classifier.persistent_elements()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.classifier;
        let e = c.expansion_size();
        let k = c.num_classes();
        let mut out = Vec::with_capacity(41 + 8 * k + 8 * e * (e + k));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(e as u32).to_le_bytes());
        out.extend_from_slice(&(k as u32).to_le_bytes());
        out.extend_from_slice(&(self.input_dim as u32).to_le_bytes());
        out.extend_from_slice(&self.expansion_seed.to_le_bytes());
        out.push(self.activation.code());
        out.extend_from_slice(&c.gamma().to_le_bytes());
        out.extend_from_slice(&c.tasks_seen().to_le_bytes());
        out.extend_from_slice(&(k as u32).to_le_bytes());
        for (column, class) in c.registry().classes().enumerate() {
            out.extend_from_slice(&class.to_le_bytes());
            out.extend_from_slice(&(column as u32).to_le_bytes());
        }
        write_row_major(&mut out, c.weights());
        write_row_major(&mut out, c.afam().matrix());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let e = r.u32()? as usize;
        let k = r.u32()? as usize;
        let input_dim = r.u32()? as usize;
        let expansion_seed = r.u64()?;
        let code = r.u8()?;
        let activation =
            Activation::from_code(code).ok_or_else(|| Error::Snapshot(format!("unknown activation code {code}")))?;
        let gamma = r.f64()?;
        let tasks_seen = r.u32()?;
        let count = r.u32()? as usize;
        if count != k {
            return Err(Error::Snapshot(format!("registry has {count} entries for {k} columns")));
        }
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            entries.push((r.u32()?, r.u32()? as usize));
        }
        entries.sort_by_key(|&(_, col)| col);
        if entries.iter().enumerate().any(|(i, &(_, col))| i != col) {
            return Err(Error::Snapshot("registry columns are not a permutation of 0..C".into()));
        }
        let registry: ClassRegistry = entries.iter().map(|&(class, _)| class).collect();
        if registry.len() != k {
            return Err(Error::Snapshot("duplicate class id in registry".into()));
        }
        let weights = r.matrix(e, k)?;
        let afam = r.matrix(e, e)?;
        if r.at != bytes.len() {
            return Err(Error::Snapshot(format!("{} trailing bytes", bytes.len() - r.at)));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Snapshot(format!("invalid gamma {gamma}")));
        }
        Ok(Self {
            input_dim,
            expansion_seed,
            activation,
            classifier: AnalyticClassifier::from_parts(weights, Afam::from_parts(afam, gamma), registry, tasks_seen),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn write_row_major(out: &mut Vec<u8>, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&end| end <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Snapshot(format!("truncated at byte {}", self.at)))?;
        let slice = &self.bytes[self.at..end];
        self.at = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Snapshot("matrix size overflow".into()))?;
        let raw = self.take(len)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(DMatrix::from_row_slice(rows, cols, &values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{FeatureMatrix, LabelMatrix};
    use crate::rng::Xoshiro256StarStar;
    use proptest::prelude::*;

    fn trained(seed: u64, e: usize, n: usize, classes: &[u32]) -> (ExpansionMap, AnalyticClassifier) {
        let map = ExpansionMap::build(3, e, seed, Activation::Relu).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n * 3).map(|_| rng.next_normal()).collect();
        let x = map.expand(&FeatureMatrix::from_row_slice(n, 3, &raw).unwrap()).unwrap();
        let labels: Vec<u32> = (0..n).map(|i| classes[i % classes.len()]).collect();
        let y = LabelMatrix::one_hot(&labels, classes).unwrap();
        (map, AnalyticClassifier::recalibrate(&x, &y, 0.1).unwrap())
    }

    #[test]
    fn header_layout() {
        let (map, c) = trained(1, 4, 6, &[9, 2]);
        let bytes = Snapshot::new(&map, c).unwrap().to_bytes();
        assert_eq!(&bytes[..4], b"AKWS");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 1);
        assert_eq!(bytes[28], 1);
        assert_eq!(f64::from_le_bytes(bytes[29..37].try_into().unwrap()), 0.1);
        assert_eq!(u32::from_le_bytes(bytes[37..41].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[41..45].try_into().unwrap()), 2);
        // (class 9, column 0), (class 2, column 1)
        assert_eq!(u32::from_le_bytes(bytes[45..49].try_into().unwrap()), 9);
        assert_eq!(u32::from_le_bytes(bytes[49..53].try_into().unwrap()), 0);
        assert_eq!(u32::from_le_bytes(bytes[53..57].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 61 + 8 * (4 * 2 + 4 * 4));
    }

    #[test]
    fn memory_accounting_for_e128() {
        let (map, c) = trained(3, 128, 40, &[0, 1, 2, 3, 4]);
        let snap = Snapshot::new(&map, c).unwrap();
        assert_eq!(snap.element_count(), 16384 + 128 * 5 + 5);
    }

    #[test]
    fn rejects_corruption() {
        let (map, c) = trained(2, 5, 8, &[0, 1]);
        let bytes = Snapshot::new(&map, c).unwrap().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Snapshot::from_bytes(&bad).is_err());
        assert!(Snapshot::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Snapshot::from_bytes(&extra).is_err());
        let mut version = bytes;
        version[4] = 2;
        assert!(Snapshot::from_bytes(&version).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(seed in any::<u64>(), e in 4usize..12, n in 1usize..20, k in 1usize..5) {
            let classes: Vec<u32> = (0..k as u32).map(|c| c * 7 + 1).collect();
            let (map, c) = trained(seed, e, n, &classes);
            let snap = Snapshot::new(&map, c).unwrap();
            let back = Snapshot::from_bytes(&snap.to_bytes()).unwrap();
            prop_assert_eq!(&back, &snap);
            prop_assert_eq!(back.rebuild_expansion().unwrap(), map);
        }
    }
}
