use std::io::Cursor;

use chartrelate::{load_image, save_image, Error, RasterImage, Rgb8};

/// Decodes with the `png` crate directly, independent of the library's decoder.
fn decode_rgb(bytes: &[u8]) -> (u32, u32, Vec<u8>) {
    let mut reader = png::Decoder::new(Cursor::new(bytes)).read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    assert_eq!(info.color_type, png::ColorType::Rgb);
    assert_eq!(info.bit_depth, png::BitDepth::Eight);
    buf.truncate(info.buffer_size());
    (info.width, info.height, buf)
}

#[test]
fn solid_red_matches_reference_decoder() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("red.png");
    save_image(&RasterImage::filled(100, 100, Rgb8::new(255, 0, 0)), &path).unwrap();
    let (w, h, data) = decode_rgb(&std::fs::read(&path).unwrap());
    assert_eq!((w, h), (100, 100));
    assert!(data.chunks(3).all(|p| p == [255, 0, 0]));

    let back = load_image(&path).unwrap();
    assert!(back.pixels().iter().all(|&p| p == Rgb8::new(255, 0, 0)));
}

#[test]
fn checkerboard_round_trips() {
    let px = vec![Rgb8::BLACK, Rgb8::WHITE, Rgb8::WHITE, Rgb8::BLACK];
    let img = RasterImage::new(2, 2, px).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("board.png");
    save_image(&img, &path).unwrap();
    assert_eq!(load_image(&path).unwrap(), img);
    let (_, _, data) = decode_rgb(&std::fs::read(&path).unwrap());
    assert_eq!(data, vec![0, 0, 0, 255, 255, 255, 255, 255, 255, 0, 0, 0]);
}

#[test]
fn alpha_is_composited_over_white() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("alpha.png");
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, 2, 1);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[255, 0, 0, 0, 0, 0, 255, 255]).unwrap();
    }
    std::fs::write(&path, bytes).unwrap();
    let img = load_image(&path).unwrap();
    assert_eq!(img.pixels(), &[Rgb8::WHITE, Rgb8::new(0, 0, 255)]);
}

#[test]
fn truncated_file_is_decode_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.png");
    let bytes = RasterImage::filled(50, 50, Rgb8::new(1, 2, 3)).to_png_bytes();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    let err = load_image(&path).unwrap_err();
    assert!(matches!(err, Error::Decode { .. }), "{err:?}");
    assert_eq!(err.code(), "decode");
}

#[test]
fn missing_file_is_not_found() {
    let err = load_image("/nonexistent/chart.png").unwrap_err();
    assert!(matches!(err, Error::NotFound(_)));
}
