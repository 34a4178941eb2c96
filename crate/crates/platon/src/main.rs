use platon_core::oracle::SuiteHooks;

fn main() {
    let code = platon::cli::main_with(
        std::env::args_os(),
        &SuiteHooks::default(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    );
    std::process::exit(code);
}
