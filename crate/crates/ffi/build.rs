use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());

    let mut config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("TAILMINER_H".to_string()),
        header: Some("/* Generated by cbindgen; do not edit. */".to_string()),
        sys_includes: vec!["stddef.h".into(), "stdint.h".into()],
        no_includes: true,
        documentation: true,
        documentation_style: cbindgen::DocumentationStyle::C,
        cpp_compat: true,
        usize_is_size_t: true,
        ..Default::default()
    };
    config.enumeration.prefix_with_name = true;
    config.enumeration.rename_variants = cbindgen::RenameRule::ScreamingSnakeCase;

    let bindings = cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("unable to generate C bindings");

    let include = crate_dir.join("include");
    std::fs::create_dir_all(&include).expect("cannot create include directory");
    bindings.write_to_file(include.join("tailminer.h"));

    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=build.rs");
}
