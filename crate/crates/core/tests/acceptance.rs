use dunkl::acceptance;
use std::process::ExitCode;

fn main() -> ExitCode {
    let mut failed = 0;
    for id in 1..=12 {
        let o = acceptance::run(id);
        println!("{}", o.line());
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
