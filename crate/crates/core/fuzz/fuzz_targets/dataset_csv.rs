#![no_main]

use libfuzzer_sys::fuzz_target;
use tadam::data::{read_dataset_csv, write_dataset_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = read_dataset_csv(data) {
        let mut out = Vec::new();
        write_dataset_csv(&ds, &mut out).expect("write accepted dataset");
        let back = read_dataset_csv(out.as_slice()).expect("re-read written dataset");
        assert_eq!(back.len(), ds.len());
    }
});
