#include "obswin/cli.hpp"

int main(int argc, char** argv) { return obswin::dispatch(argc, argv); }
