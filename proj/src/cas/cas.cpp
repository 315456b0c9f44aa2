namespace pdl {}
