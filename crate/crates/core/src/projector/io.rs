//! Binary model container.
//!
//! Little-endian layout, version 1:
//!
//! ```text
//! magic "R2DPCAMD" | version u32
//! h, w, r, m                      u64 × 4
//! s, p (inf for ∞), gamma, tol    f64 × 4
//! step_tol                        f64
//! max_iter u64 | lambda f64 | init u8 | seed u64
//! global mean   h·w f64 (row-major)
//! class means   m × h·w f64
//! W             w·r f64 (column-major)
//! D             r f64
//! v             m f64
//! class counts  m u64
//! per axis      iterations u64, converged u8, degenerate u8
//! ```

use std::fs;
use std::path::Path;

use super::{AxisStatus, FitConfig, Init, ProjectionModel};
use crate::dataset::Centering;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, PNorm};
use crate::relaxation::RelaxationVector;

pub const MODEL_MAGIC: &[u8; 8] = b"R2DPCAMD";
pub const MODEL_VERSION: u32 = 1;

impl ProjectionModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let (h, w) = (self.height(), self.width());
        let r = self.rank();
        let m = self.relax.num_classes();
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        for n in [h, w, r, m] {
            put_u64(&mut out, n as u64);
        }
        let c = &self.config;
        for x in [c.s, c.p.value(), c.gamma, c.tol, c.step_tol] {
            put_f64(&mut out, x);
        }
        put_u64(&mut out, c.max_iter as u64);
        put_f64(&mut out, c.lambda_sparsity);
        out.push(c.init.code());
        put_u64(&mut out, c.seed);

        put_all(&mut out, self.centering.global_mean.as_slice());
        for cm in &self.centering.class_means {
            put_all(&mut out, cm.as_slice());
        }
        for t in 0..r {
            put_all(&mut out, &self.basis.column(t));
        }
        put_all(&mut out, &self.objective);
        put_all(&mut out, self.relax.weights());
        for &n in self.relax.class_counts() {
            put_u64(&mut out, n as u64);
        }
        for a in &self.axes {
            put_u64(&mut out, a.iterations as u64);
            out.push(a.converged as u8);
            out.push(a.degenerate as u8);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ProjectionModel> {
        let mut rd = Reader { buf: bytes, pos: 0 };
        if rd.take(8)? != MODEL_MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let version = u32::from_le_bytes(rd.take(4)?.try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let h = rd.count()?;
        let w = rd.count()?;
        let r = rd.count()?;
        let m = rd.count()?;
        if h == 0 || w == 0 || r == 0 || m == 0 || r > w {
            return Err(Error::ModelFormat(format!("bad shape h={h} w={w} r={r} m={m}")));
        }
        // every remaining section is at least this many bytes
        let needed = h
            .checked_mul(w)
            .and_then(|hw| hw.checked_mul(m + 1))
            .and_then(|x| x.checked_add(w.checked_mul(r)?))
            .and_then(|x| x.checked_add(r + m))
            .and_then(|x| x.checked_mul(8));
        if needed.is_none_or(|n| n > bytes.len()) {
            return Err(Error::ModelFormat("truncated".into()));
        }
        let s = rd.f64()?;
        let p = PNorm::from_value(rd.f64()?);
        let gamma = rd.f64()?;
        let tol = rd.f64()?;
        let step_tol = rd.f64()?;
        let max_iter = rd.count()?;
        let lambda_sparsity = rd.f64()?;
        let init = Init::from_code(rd.u8()?)
            .ok_or_else(|| Error::ModelFormat("unknown init code".into()))?;
        let seed = rd.u64()?;

        let fmt_err = |e: Error| Error::ModelFormat(e.to_string());
        let global_mean = Matrix::new(h, w, rd.f64s(h * w)?).map_err(fmt_err)?;
        let class_means = (0..m)
            .map(|_| Matrix::new(h, w, rd.f64s(h * w)?).map_err(fmt_err))
            .collect::<Result<Vec<_>>>()?;
        let columns = (0..r).map(|_| rd.f64s(w)).collect::<Result<Vec<_>>>()?;
        let basis = Matrix::from_columns(&columns).map_err(fmt_err)?;
        let objective = rd.f64s(r)?;
        let weights = rd.f64s(m)?;
        let counts = (0..m).map(|_| rd.count()).collect::<Result<Vec<_>>>()?;
        let relax = RelaxationVector::new(weights, counts).map_err(fmt_err)?;
        let axes = (0..r)
            .map(|_| {
                Ok(AxisStatus {
                    iterations: rd.count()?,
                    converged: rd.u8()? != 0,
                    degenerate: rd.u8()? != 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if rd.pos != bytes.len() {
            return Err(Error::ModelFormat(format!(
                "{} trailing bytes",
                bytes.len() - rd.pos
            )));
        }
        Ok(ProjectionModel {
            basis,
            objective,
            centering: Centering {
                global_mean,
                class_means,
            },
            relax,
            config: FitConfig {
                s,
                p,
                gamma,
                r,
                tol,
                step_tol,
                max_iter,
                lambda_sparsity,
                init,
                seed,
            },
            axes,
        })
    }
}

pub fn write_model(model: &ProjectionModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model.to_bytes())?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ProjectionModel> {
    ProjectionModel::from_bytes(&fs::read(path)?)
}

fn put_u64(out: &mut Vec<u8>, x: u64) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, x: f64) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_all(out: &mut Vec<u8>, xs: &[f64]) {
    xs.iter().for_each(|&x| put_f64(out, x));
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::ModelFormat("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn count(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::ModelFormat("count overflows".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}
