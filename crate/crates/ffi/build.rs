use std::env;
use std::path::PathBuf;

fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    let header = crate_dir.join("include/ragscale.h");

    match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")).unwrap())
        .generate()
    {
        Ok(bindings) => {
            std::fs::create_dir_all(header.parent().unwrap()).unwrap();
            bindings.write_to_file(&header);
        }
        Err(e) => {
            // Keep an existing header usable when generation fails midway
            // through an edit; fail hard if none exists.
            if header.exists() {
                println!("cargo:warning=cbindgen failed, keeping existing header: {e}");
            } else {
                panic!("cbindgen failed and no header exists: {e}");
            }
        }
    }
}
