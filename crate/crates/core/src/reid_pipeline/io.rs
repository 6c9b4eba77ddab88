use std::path::Path;

use super::feature::{Feature, FrameInfo};
use super::gallery::Gallery;
use super::metrics::CmcReport;
use crate::{Error, Result};

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

/// `camera_id,identity_id,frame_index,f0..f{F-1}`, one row per entry, in shard order.
pub fn write_gallery_csv(path: &Path, gallery: &Gallery) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path).map_err(|e| csv_err(path, e))?;
    let dim = gallery.entries().next().map(|(f, _)| f.dim()).unwrap_or(0);
    let mut header = vec!["camera_id".to_string(), "identity_id".into(), "frame_index".into()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (f, id) in gallery.entries() {
        let mut row = vec![f.camera().to_string(), id.to_string(), f.frame().frame.to_string()];
        row.extend(f.values().iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_gallery_csv`]. The gallery gets at least `cameras`
/// shards, more if the file names higher camera ids.
pub fn read_gallery_csv(path: &Path, cameras: usize) -> Result<Gallery> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut gallery = Gallery::new(cameras);
    let mut dim = None;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |what: &str| Error::Parse(format!("{}: row {}: {what}", path.display(), line + 2));
        if rec.len() < 4 {
            return Err(bad("expected camera, identity, frame and features"));
        }
        let camera: usize = rec[0].trim().parse().map_err(|_| bad("camera_id"))?;
        let identity: u64 = rec[1].trim().parse().map_err(|_| bad("identity_id"))?;
        let frame: u64 = rec[2].trim().parse().map_err(|_| bad("frame_index"))?;
        let values = rec.iter().skip(3).map(|v| v.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>().map_err(|_| bad("feature value"))?;
        if *dim.get_or_insert(values.len()) != values.len() {
            return Err(bad("feature dimension differs from earlier rows"));
        }
        gallery.insert(Feature::from_unit(values, FrameInfo { camera, frame })?, identity)?;
    }
    Ok(gallery)
}

/// `k,cmc_k` rows followed by a single `mAP,<value>` row.
pub fn write_metrics_csv(path: &Path, report: &CmcReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["k", "cmc_k"]).map_err(|e| csv_err(path, e))?;
    for (k, v) in report.cmc.iter().enumerate() {
        w.write_record([(k + 1).to_string(), v.to_string()]).map_err(|e| csv_err(path, e))?;
    }
    w.write_record(["mAP".to_string(), report.map.to_string()]).map_err(|e| csv_err(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
