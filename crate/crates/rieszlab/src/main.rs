mod cli;
mod report;

fn main() {
    cli::run()
}
