use std::fs;
use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CIFAR_RECORDS_PER_FILE: usize = 10_000;
/// One label byte plus 3·32·32 pixel bytes per record.
pub const CIFAR_FILE_BYTES: usize = CIFAR_RECORDS_PER_FILE * (1 + 3 * 32 * 32);

const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
const TEST_FILE: &str = "test_batch.bin";

fn format_err(path: &Path, offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    }
}

/// Parses a file of fixed-size records: one label byte, then the image as
/// channel-major row-major bytes. Pixel byte `v` becomes `v / 255`.
///
/// With `expected_records` set, the file length must match exactly.
pub fn read_records(
    path: &Path,
    sample_shape: [usize; 3],
    num_classes: usize,
    expected_records: Option<usize>,
) -> Result<LabeledDataset> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(format_err(path, 0, "file not found"));
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    let pixels: usize = sample_shape.iter().product();
    let record = pixels + 1;
    match expected_records {
        Some(n) if bytes.len() != n * record => {
            let msg = if bytes.len() < n * record {
                format!("truncated: expected {} bytes, file ends early", n * record)
            } else {
                format!("expected {} bytes, found trailing data", n * record)
            };
            return Err(format_err(path, bytes.len().min(n * record), msg));
        }
        None if bytes.len() % record != 0 => {
            let whole = bytes.len() / record * record;
            return Err(format_err(path, bytes.len(), format!(
                "partial record starting at byte {whole}; records are {record} bytes"
            )));
        }
        _ => {}
    }
    let n = bytes.len() / record;
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * pixels);
    for (i, rec) in bytes.chunks_exact(record).enumerate() {
        let label = rec[0] as usize;
        if label >= num_classes {
            return Err(format_err(path, i * record, format!(
                "label byte {label} exceeds {}",
                num_classes - 1
            )));
        }
        labels.push(label);
        data.extend(rec[1..].iter().map(|&v| v as f64 / 255.0));
    }
    let images = Tensor::new(vec![n, sample_shape[0], sample_shape[1], sample_shape[2]], data)?;
    LabeledDataset::new(images, labels, num_classes)
}

/// Writes a dataset in the record layout read by [`read_records`]. Values
/// are quantized to `round(v · 255)`.
pub fn write_records(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    if dataset.num_classes > 256 {
        return Err(Error::invalid("record labels are single bytes"));
    }
    let pixels = dataset.images.sample_len();
    let mut buf = Vec::with_capacity(dataset.len() * (pixels + 1));
    for (i, &y) in dataset.labels.iter().enumerate() {
        buf.push(y as u8);
        buf.extend(
            dataset
                .images
                .sample(i)
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn read_cifar_file(path: &Path) -> Result<LabeledDataset> {
    read_records(path, [3, 32, 32], 10, Some(CIFAR_RECORDS_PER_FILE))
}

/// Loads the five training batches and the test batch from `dir`.
pub fn load_cifar10(dir: &Path) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut parts = Vec::with_capacity(TRAIN_FILES.len());
    for name in TRAIN_FILES {
        parts.push(read_cifar_file(&dir.join(name))?);
    }
    let test = read_cifar_file(&dir.join(TEST_FILE))?;
    let images: Vec<Tensor> = parts.iter().map(|p| p.images.clone()).collect();
    let labels = parts.iter().flat_map(|p| p.labels.iter().copied()).collect();
    let train = LabeledDataset::new(Tensor::concat(&images)?, labels, 10)?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record_bytes(n: usize, pixels: usize) -> Vec<u8> {
        let mut out = Vec::new();
        for i in 0..n {
            out.push((i % 10) as u8);
            out.extend((0..pixels).map(|p| ((i * 31 + p * 7) % 256) as u8));
        }
        out
    }

    #[test]
    fn full_pixel_maps_to_one() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.bin");
        let mut bytes = vec![3u8];
        bytes.extend([255u8, 0, 128, 255]);
        fs::write(&p, &bytes).unwrap();
        let d = read_records(&p, [1, 2, 2], 10, Some(1)).unwrap();
        assert_eq!(d.images.data()[0], 1.0);
        assert_eq!(d.images.data()[1], 0.0);
        assert_eq!(d.labels, vec![3]);
    }

    #[test]
    fn records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.bin");
        let q = dir.path().join("s.bin");
        let bytes = record_bytes(20, 12);
        fs::write(&p, &bytes).unwrap();
        let d = read_records(&p, [3, 2, 2], 10, None).unwrap();
        write_records(&d, &q).unwrap();
        assert_eq!(fs::read(&q).unwrap(), bytes);
    }

    #[test]
    fn bad_label_reports_record_offset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.bin");
        let mut bytes = record_bytes(3, 4);
        bytes[2 * 5] = 10;
        fs::write(&p, &bytes).unwrap();
        match read_records(&p, [1, 2, 2], 10, None) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 10),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn missing_directory_names_first_file() {
        let dir = tempfile::tempdir().unwrap();
        match load_cifar10(dir.path()) {
            Err(Error::Format { path, offset, .. }) => {
                assert!(path.ends_with("data_batch_1.bin"));
                assert_eq!(offset, 0);
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
