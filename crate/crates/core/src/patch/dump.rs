//! Debug dump of extracted patches: a headerless sequence of fixed-size
//! little-endian records `x y scale response (f32) | modality (u8) | 400 x f32`.

use super::extract::{Patch, PATCH_LEN};
use super::keypoints::Keypoint;
use super::raster::Modality;
use crate::error::Result;
use crate::nn::serialize::{put_f32s, Reader};

pub const RECORD_LEN: usize = 4 * 4 + 1 + 4 * PATCH_LEN;

pub fn encode_patch_dump(patches: &[Patch]) -> Vec<u8> {
    let mut out = Vec::with_capacity(patches.len() * RECORD_LEN);
    for p in patches {
        let k = &p.keypoint;
        put_f32s(&mut out, &[k.x, k.y, k.scale, k.response]);
        out.push(p.modality.tag());
        put_f32s(&mut out, &p.data);
    }
    out
}

/// Labels are not stored, so decoded patches carry `label: None`.
pub fn decode_patch_dump(bytes: &[u8]) -> Result<Vec<Patch>> {
    let mut r = Reader::new(bytes);
    let mut patches = Vec::with_capacity(bytes.len() / RECORD_LEN);
    while !r.is_empty() {
        let k = r.f32s(4)?;
        let modality = Modality::from_tag(r.u8()?)?;
        let data = r.f32s(PATCH_LEN)?;
        patches.push(Patch {
            data,
            modality,
            keypoint: Keypoint { x: k[0], y: k[1], scale: k[2], response: k[3] },
            label: None,
        });
    }
    Ok(patches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn sample(i: usize) -> Patch {
        Patch {
            data: (0..400).map(|j| (i * 400 + j) as f32 * 0.01 - 3.0).collect(),
            modality: if i % 2 == 0 { Modality::Image } else { Modality::Depth },
            keypoint: Keypoint { x: 10.0 + i as f32, y: 40.5, scale: 2.4, response: 0.013 },
            label: None,
        }
    }

    #[test]
    fn round_trip_and_layout() {
        let ps: Vec<Patch> = (0..3).map(sample).collect();
        let bytes = encode_patch_dump(&ps);
        assert_eq!(bytes.len(), 3 * RECORD_LEN);
        assert_eq!(&bytes[0..4], &10.0f32.to_le_bytes());
        assert_eq!(bytes[16], Modality::Image.tag());
        assert_eq!(decode_patch_dump(&bytes).unwrap(), ps);
        assert!(decode_patch_dump(&[]).unwrap().is_empty());
    }

    #[test]
    fn partial_record_is_truncated() {
        let bytes = encode_patch_dump(&[sample(0)]);
        let err = decode_patch_dump(&bytes[..RECORD_LEN - 1]).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }));
    }

    #[test]
    fn bad_modality_is_rejected() {
        let mut bytes = encode_patch_dump(&[sample(0)]);
        bytes[16] = 9;
        assert!(decode_patch_dump(&bytes).is_err());
    }
}
