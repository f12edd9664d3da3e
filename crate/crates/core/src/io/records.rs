//! Result records as CSV with the header
//! `study,p,r,n,ratio,rescaled_n,metric,converged,seed,wall_time_ms`.

use std::path::Path;

use crate::error::Result;
use crate::experiments::ExperimentRecord;

pub const RECORD_HEADER: &str = "study,p,r,n,ratio,rescaled_n,metric,converged,seed,wall_time_ms";

pub fn records_to_csv(records: &[ExperimentRecord]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(RECORD_HEADER.split(','))?;
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| std::io::Error::other(e.to_string()).into())
}

pub fn records_from_csv(bytes: &[u8]) -> Result<Vec<ExperimentRecord>> {
    let mut r = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    super::write_atomic(path, &records_to_csv(records)?)
}

pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    records_from_csv(&std::fs::read(path)?)
}
