//! Keeps the committed C header in lock-step with the exported surface.
//! No build.rs: regeneration is explicit, so downstream builds never need
//! cbindgen installed.

use std::path::Path;

fn generate() -> String {
    let crate_dir = env!("CARGO_MANIFEST_DIR");
    let config = cbindgen::Config::from_file(Path::new(crate_dir).join("cbindgen.toml"))
        .expect("cbindgen.toml parses");
    let bindings = cbindgen::Builder::new()
        .with_crate(crate_dir)
        .with_config(config)
        .generate()
        .expect("cbindgen generates");
    let mut buf = Vec::new();
    bindings.write(&mut buf);
    String::from_utf8(buf).expect("header is utf-8")
}

#[test]
fn committed_header_is_current() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/tricount.h");
    let generated = generate();
    if std::env::var_os("TRICOUNT_REGEN_HEADER").is_some() {
        std::fs::write(&path, &generated).expect("write header");
        return;
    }
    let committed = std::fs::read_to_string(&path)
        .expect("include/tricount.h exists; regenerate with TRICOUNT_REGEN_HEADER=1");
    assert_eq!(
        committed, generated,
        "include/tricount.h is stale; regenerate with TRICOUNT_REGEN_HEADER=1 cargo test -p tricount-ffi header"
    );
}
