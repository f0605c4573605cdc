// Placeholder; filled in once the library compiles.
fn main() {}
