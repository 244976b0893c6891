from permlab.cli import main

raise SystemExit(main())
