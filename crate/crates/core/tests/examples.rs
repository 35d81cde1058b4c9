//! Every example runs to completion.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }
    };
}

example!(discrete_filter);
example!(fixed_beta_comparison);
example!(birth_death_cle);
example!(nonlinear_logistic);
example!(wls_oracle);
example!(euler_limit);
example!(innovation_whiteness);
example!(model_file);

#[test]
fn examples_run() {
    discrete_filter::run().unwrap();
    fixed_beta_comparison::run().unwrap();
    birth_death_cle::run().unwrap();
    nonlinear_logistic::run().unwrap();
    wls_oracle::run().unwrap();
    euler_limit::run().unwrap();
    innovation_whiteness::run().unwrap();
    model_file::run().unwrap();
}

#[test]
fn shipped_model_files_parse() {
    for name in ["example_sec3", "two_state", "birth_death"] {
        let path = format!("{}/models/{name}.model", env!("CARGO_MANIFEST_DIR"));
        let text = std::fs::read_to_string(&path).unwrap();
        let file = sdkf::model_file::ModelFile::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(sdkf::model_file::ModelFile::parse(&file.to_text()).unwrap(), file);
    }
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/models/example_sec3.model")).unwrap();
    let file = sdkf::model_file::ModelFile::parse(&text).unwrap();
    assert_eq!(file.model, sdkf::model_file::FileModel::Discrete(sdkf::catalog::example_sec3()));
}
