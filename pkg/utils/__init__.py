# Utils package for the Zak-OTFS simulator
