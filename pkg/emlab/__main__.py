from emlab.cli import main

raise SystemExit(main())
