//! Generates the C header for the FFI surface into `include/ddnoma.h`.

use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").expect("cargo sets CARGO_MANIFEST_DIR");
    let header = PathBuf::from(&crate_dir).join("include").join("ddnoma.h");

    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("DDNOMA_H".to_string()),
        documentation: true,
        documentation_style: cbindgen::DocumentationStyle::C99,
        cpp_compat: true,
        usize_is_size_t: true,
        ..Default::default()
    };

    match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
    {
        Ok(bindings) => {
            bindings.write_to_file(header);
        }
        // Syntax errors in src/lib.rs surface through rustc with better
        // spans; do not fail the build twice for the same mistake.
        Err(cbindgen::Error::ParseSyntaxError { .. }) => {}
        Err(e) => panic!("header generation failed: {e}"),
    }

    println!("cargo:rerun-if-changed=src/lib.rs");
}
