use crate::error::{Error, Result};

/// Row-major single-plane raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Raster<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::shape(format!(
                "raster {width}x{height} needs {} values, got {}",
                width.saturating_mul(height),
                data.len()
            )));
        }
        Ok(Raster { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Raster {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Raster { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

pub type Rgb = [u8; 3];

/// 8-bit face image as read from PGM or PPM.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceImage {
    Gray(Raster<u8>),
    Color(Raster<Rgb>),
}

impl FaceImage {
    pub fn width(&self) -> usize {
        match self {
            FaceImage::Gray(r) => r.width(),
            FaceImage::Color(r) => r.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            FaceImage::Gray(r) => r.height(),
            FaceImage::Color(r) => r.height(),
        }
    }

    /// Luma 0.299 R + 0.587 G + 0.114 B for color input.
    pub fn to_gray(&self) -> Raster<f32> {
        match self {
            FaceImage::Gray(r) => r.map(f32::from),
            FaceImage::Color(r) => r.map(|[red, green, blue]| {
                0.299 * f32::from(red) + 0.587 * f32::from(green) + 0.114 * f32::from(blue)
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    Image,
    Depth,
}

impl Modality {
    pub const ALL: [Modality; 2] = [Modality::Image, Modality::Depth];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Depth => "depth",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Modality::Image => 0,
            Modality::Depth => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Modality::Image),
            1 => Ok(Modality::Depth),
            other => Err(Error::Malformed(format!("unknown modality tag {other}"))),
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" | "rgb" => Ok(Modality::Image),
            "depth" => Ok(Modality::Depth),
            other => Err(Error::invalid(format!("unknown modality {other:?}"))),
        }
    }
}

/// Registered image and depth capture of one face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceSample {
    pub image: FaceImage,
    /// Millimeters; 0 marks an invalid pixel.
    pub depth: Raster<u16>,
    pub registered: bool,
    pub label: Option<String>,
    pub tag: Option<String>,
}

impl FaceSample {
    pub fn new(image: FaceImage, depth: Raster<u16>) -> Result<Self> {
        let sample = FaceSample {
            image,
            depth,
            registered: true,
            label: None,
            tag: None,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        if self.registered
            && (self.image.width() != self.depth.width() || self.image.height() != self.depth.height())
        {
            return Err(Error::shape(format!(
                "registered sample has image {}x{} but depth {}x{}",
                self.image.width(),
                self.image.height(),
                self.depth.width(),
                self.depth.height()
            )));
        }
        Ok(())
    }
}
