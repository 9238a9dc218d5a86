#![no_main]

use libfuzzer_sys::fuzz_target;
use tadam::harness::emit::read_results_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_results_csv(data);
});
