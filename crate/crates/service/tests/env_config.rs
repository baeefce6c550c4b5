use clap::Parser;
use tugwar_service::cli::Cli;
use tugwar_service::ServiceConfig;

// The only test in this binary, so setting the variable races with nothing.
#[test]
fn config_path_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("env.toml");
    std::fs::write(&path, "[search]\ndepth = 1\nfriendly = [7]\nenemy = [2]\n").unwrap();
    std::env::set_var("TOW_CONFIG", &path);
    let cli = Cli::try_parse_from(["tow", "interest"]).unwrap();
    assert_eq!(cli.config.as_deref(), Some(path.as_path()));
    let resolved = ServiceConfig::resolve(None).unwrap();
    assert_eq!(resolved.search.friendly, vec![7]);
    // An explicit flag wins.
    let other = tmp.path().join("flag.toml");
    std::fs::write(&other, "").unwrap();
    let cli = Cli::try_parse_from(["tow", "interest", "--config", other.to_str().unwrap()]).unwrap();
    assert_eq!(cli.config.as_deref(), Some(other.as_path()));
    assert_eq!(ServiceConfig::resolve(Some(&other)).unwrap(), ServiceConfig::default());
    std::env::remove_var("TOW_CONFIG");
}
