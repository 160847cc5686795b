//! Dense matrices on disk as `{ "rows": r, "cols": c, "data": [...] }`
//! with `data` in row-major order.

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixRecord {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().iter().copied().collect(),
        }
    }
}

impl TryFrom<MatrixRecord> for DMatrix<f64> {
    type Error = String;

    fn try_from(r: MatrixRecord) -> Result<Self, String> {
        if r.data.len() != r.rows * r.cols {
            return Err(format!(
                "{}×{} matrix with {} entries",
                r.rows,
                r.cols,
                r.data.len()
            ));
        }
        Ok(DMatrix::from_row_slice(r.rows, r.cols, &r.data))
    }
}

pub mod row_major {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        MatrixRecord::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        DMatrix::try_from(MatrixRecord::deserialize(d)?).map_err(D::Error::custom)
    }
}

pub mod row_major_option {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(MatrixRecord::from).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        Option::<MatrixRecord>::deserialize(d)?
            .map(|r| DMatrix::try_from(r).map_err(D::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let r = MatrixRecord::from(&m);
        assert_eq!(r.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(DMatrix::try_from(r).unwrap(), m);
    }

    #[test]
    fn rejects_short_data() {
        let r = MatrixRecord {
            rows: 2,
            cols: 2,
            data: vec![1.0],
        };
        assert!(DMatrix::try_from(r).is_err());
    }
}
