use std::io::{Read, Write};
use std::path::Path;

use super::GeometryError;

/// File magic of the binary depth format.
pub const DEPTH_MAGIC: &[u8; 8] = b"DORODPTH";

/// Row-major z-depth image in meters; 0.0 marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl DepthFrame {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self, GeometryError> {
        if data.len() != width as usize * height as usize {
            return Err(GeometryError::Format(format!(
                "{}x{} frame needs {} values, got {}",
                width,
                height,
                width as usize * height as usize,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(GeometryError::Format(format!("invalid depth value {bad}")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, u: u32, v: u32) -> f32 {
        self.data[v as usize * self.width as usize + u as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, d: f32) {
        let w = self.width as usize;
        self.data[v as usize * w + u as usize] = d;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        out.extend_from_slice(DEPTH_MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        for d in &self.data {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GeometryError> {
        if bytes.len() < 16 || &bytes[..8] != DEPTH_MAGIC {
            return Err(GeometryError::Format("missing DORODPTH header".into()));
        }
        let width = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        let height = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes"));
        let n = width as usize * height as usize;
        let body = &bytes[16..];
        if body.len() != n * 4 {
            return Err(GeometryError::Format(format!(
                "expected {} payload bytes, found {}",
                n * 4,
                body.len()
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Self::new(width, height, data)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), GeometryError> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, GeometryError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<(), GeometryError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GeometryError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_bit_exact() {
        let mut f = DepthFrame::filled(2, 1, 0.0);
        f.set(1, 0, 1.5);
        let bytes = f.to_bytes();
        let mut want = b"DORODPTH".to_vec();
        want.extend_from_slice(&[2, 0, 0, 0, 1, 0, 0, 0]);
        want.extend_from_slice(&0.0f32.to_le_bytes());
        want.extend_from_slice(&1.5f32.to_le_bytes());
        assert_eq!(bytes, want);
        assert_eq!(DepthFrame::from_bytes(&bytes).unwrap(), f);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(DepthFrame::from_bytes(b"NOTDEPTH\0\0\0\0\0\0\0\0").is_err());
        let mut bytes = DepthFrame::filled(2, 2, 1.0).to_bytes();
        bytes.pop();
        assert!(DepthFrame::from_bytes(&bytes).is_err());
        let mut bytes = DepthFrame::filled(1, 1, 1.0).to_bytes();
        bytes[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(DepthFrame::from_bytes(&bytes).is_err());
    }
}
