use std::io::Cursor;

use polydepth_core::bev::DepthMap;

use crate::{Error, Result};

/// Raw units per meter.
pub const DEPTH_SCALE: f64 = 256.0;

/// Width, height and raw 16-bit samples of a single-channel PNG.
pub fn decode_depth_raw(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| Error::Format(format!("depth png: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::Format(format!("depth png: expected one gray channel, found {:?}", info.color_type)));
    }
    if info.bit_depth != png::BitDepth::Sixteen {
        return Err(Error::Format(format!("depth png: expected 16-bit samples, found {:?}", info.bit_depth)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).map_err(|e| Error::Format(format!("depth png: {e}")))?;
    let raw = buf[..frame.buffer_size()]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect::<Vec<_>>();
    if raw.len() != w * h {
        return Err(Error::Format("depth png: truncated image data".into()));
    }
    Ok((w, h, raw))
}

pub fn encode_depth_raw(width: usize, height: usize, raw: &[u16]) -> Result<Vec<u8>> {
    if raw.len() != width * height {
        return Err(Error::Format("depth png: sample count differs from width * height".into()));
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc.write_header().map_err(|e| Error::Format(format!("depth png: {e}")))?;
        let bytes: Vec<u8> = raw.iter().flat_map(|v| v.to_be_bytes()).collect();
        writer.write_image_data(&bytes).map_err(|e| Error::Format(format!("depth png: {e}")))?;
    }
    Ok(out)
}

/// Meters are `raw / 256`; raw `0` is an invalid pixel and reads as depth 0.
pub fn load_depth_png(bytes: &[u8]) -> Result<DepthMap> {
    let (w, h, raw) = decode_depth_raw(bytes)?;
    let data = raw.into_iter().map(|r| r as f64 / DEPTH_SCALE).collect();
    Ok(DepthMap::new(w, h, data)?)
}

/// Quantizes to 1/256 m. Depths beyond the 16-bit range are an error.
pub fn encode_depth_png(d: &DepthMap) -> Result<Vec<u8>> {
    let raw = d
        .data()
        .iter()
        .map(|m| {
            let r = (m * DEPTH_SCALE).round();
            if r > u16::MAX as f64 {
                Err(Error::Format(format!("depth png: {m} m exceeds the 16-bit range")))
            } else {
                Ok(r as u16)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    encode_depth_raw(d.width(), d.height(), &raw)
}
